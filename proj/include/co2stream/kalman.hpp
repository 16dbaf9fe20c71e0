#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace co2stream {

/// Mean is (cx, cy, aspect w/h, height, and their per-frame velocities).
template <typename Scalar>
struct KalmanState {
  using Mean = Eigen::Matrix<Scalar, 8, 1>;
  using Covariance = Eigen::Matrix<Scalar, 8, 8>;

  Mean mean = Mean::Zero();
  Covariance covariance = Covariance::Identity();
};

/// Symmetric with a nonnegative diagonal, both at tolerance `tol`.
template <typename Scalar>
bool is_valid_covariance(const typename KalmanState<Scalar>::Covariance& cov, Scalar tol = Scalar(1e-9)) {
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > tol) return false;
  return cov.diagonal().minCoeff() >= -tol;
}

/// Constant-velocity filter over (cx, cy, a, h) with noise proportional to box height.
template <typename Scalar>
class KalmanFilterXYAH {
 public:
  using State = KalmanState<Scalar>;
  using Mean = typename State::Mean;
  using Covariance = typename State::Covariance;
  using Measurement = Eigen::Matrix<Scalar, 4, 1>;

  explicit KalmanFilterXYAH(Scalar std_weight_position = Scalar(1) / 20,
                            Scalar std_weight_velocity = Scalar(1) / 160)
      : std_pos_(std_weight_position), std_vel_(std_weight_velocity) {
    motion_.setIdentity();
    for (int i = 0; i < 4; ++i) motion_(i, i + 4) = Scalar(1);
    observation_.setZero();
    observation_.template leftCols<4>().setIdentity();
  }

  State initiate(const Measurement& z) const {
    State s;
    s.mean.template head<4>() = z;
    s.mean.template tail<4>().setZero();
    const Scalar h = z(3);
    Mean std_dev;
    std_dev << 2 * std_pos_ * h, 2 * std_pos_ * h, Scalar(1e-2), 2 * std_pos_ * h, 10 * std_vel_ * h,
        10 * std_vel_ * h, Scalar(1e-5), 10 * std_vel_ * h;
    s.covariance = std_dev.array().square().matrix().asDiagonal();
    return s;
  }

  void predict(State& s) const {
    const Scalar h = s.mean(3);
    Mean std_dev;
    std_dev << std_pos_ * h, std_pos_ * h, Scalar(1e-2), std_pos_ * h, std_vel_ * h, std_vel_ * h, Scalar(1e-5),
        std_vel_ * h;
    const Covariance process = std_dev.array().square().matrix().asDiagonal();
    s.mean = motion_ * s.mean;
    s.covariance = motion_ * s.covariance * motion_.transpose() + process;
    symmetrize(s.covariance);
  }

  void update(State& s, const Measurement& z) const {
    const Scalar h = s.mean(3);
    Measurement std_dev;
    std_dev << std_pos_ * h, std_pos_ * h, Scalar(1e-1), std_pos_ * h;
    const Eigen::Matrix<Scalar, 4, 4> noise = std_dev.array().square().matrix().asDiagonal();

    const Measurement projected = observation_ * s.mean;
    const Eigen::Matrix<Scalar, 4, 4> innovation_cov =
        observation_ * s.covariance * observation_.transpose() + noise;
    const Eigen::Matrix<Scalar, 8, 4> pht = s.covariance * observation_.transpose();
    // K = P H^T S^-1, solved through the Cholesky factor of S.
    const Eigen::Matrix<Scalar, 8, 4> gain = innovation_cov.llt().solve(pht.transpose()).transpose();
    s.mean += gain * (z - projected);
    s.covariance -= gain * innovation_cov * gain.transpose();
    symmetrize(s.covariance);
  }

 private:
  static void symmetrize(Covariance& c) { c = (c + c.transpose()) / Scalar(2); }

  Scalar std_pos_;
  Scalar std_vel_;
  Eigen::Matrix<Scalar, 8, 8> motion_;
  Eigen::Matrix<Scalar, 4, 8> observation_;
};

}  // namespace co2stream
