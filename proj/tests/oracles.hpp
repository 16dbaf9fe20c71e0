#pragma once

// Slow, obviously-correct reimplementations used as references by the tests.
// Nothing here calls into the library's matching or AP code.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace oracle {

struct Box {
  double x, y, w, h;
};

/// IoU from corner coordinates.
inline double iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

/// Exact rational, enough for AP over a handful of predictions.
struct Q {
  std::int64_t n = 0;
  std::int64_t d = 1;
  Q() = default;
  Q(std::int64_t num, std::int64_t den) : n(num), d(den) {
    const std::int64_t g = std::gcd(n, d);
    if (g > 1) {
      n /= g;
      d /= g;
    }
  }
  friend Q operator+(Q a, Q b) { return {a.n * b.d + b.n * a.d, a.d * b.d}; }
  friend Q operator-(Q a, Q b) { return {a.n * b.d - b.n * a.d, a.d * b.d}; }
  friend Q operator*(Q a, Q b) { return {a.n * b.n, a.d * b.d}; }
  friend bool operator<(Q a, Q b) { return a.n * b.d < b.n * a.d; }
  friend bool operator==(Q a, Q b) { return a.n * b.d == b.n * a.d; }
  double value() const { return static_cast<double>(n) / static_cast<double>(d); }
};

/// Area under p_interp(r) = max{ precision_j : recall_j >= r }, integrated exactly
/// over the distinct recall levels reached by the ranked list.
inline double average_precision(const std::vector<bool>& flags, std::size_t n_gt) {
  if (n_gt == 0) return flags.empty() ? std::numeric_limits<double>::quiet_NaN() : 0.0;
  std::vector<Q> precision, recall;
  std::int64_t tp = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    tp += flags[i] ? 1 : 0;
    precision.emplace_back(tp, static_cast<std::int64_t>(i + 1));
    recall.emplace_back(tp, static_cast<std::int64_t>(n_gt));
  }
  std::vector<Q> levels;
  for (const Q& r : recall) {
    if (r.n > 0 && std::none_of(levels.begin(), levels.end(), [&](const Q& l) { return l == r; })) levels.push_back(r);
  }
  std::sort(levels.begin(), levels.end());
  Q area(0, 1);
  Q prev(0, 1);
  for (const Q& level : levels) {
    Q best(0, 1);
    for (std::size_t j = 0; j < recall.size(); ++j) {
      if (!(recall[j] < level) && best < precision[j]) best = precision[j];
    }
    area = area + (level - prev) * best;
    prev = level;
  }
  return area.value();
}

struct Pred {
  int image;
  int cls;
  double conf;
  Box box;
};

struct Gt {
  int image;
  int cls;
  Box box;
};

/// Greedy matching: repeatedly take the highest-confidence unprocessed prediction
/// (lowest index on ties) and give it the best unmatched same-class object in its
/// image (lowest index on IoU ties) if the IoU reaches `thr`.
inline std::vector<bool> greedy_flags(const std::vector<Pred>& preds, const std::vector<Gt>& gts, double thr,
                                      std::vector<bool>* gt_used_out = nullptr) {
  std::vector<bool> done(preds.size(), false), tp(preds.size(), false), used(gts.size(), false);
  for (std::size_t step = 0; step < preds.size(); ++step) {
    std::optional<std::size_t> pick;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (done[i]) continue;
      if (!pick || preds[i].conf > preds[*pick].conf) pick = i;
    }
    done[*pick] = true;
    const Pred& p = preds[*pick];
    std::optional<std::size_t> best;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g] || gts[g].image != p.image || gts[g].cls != p.cls) continue;
      const double v = iou(p.box, gts[g].box);
      if (v >= thr && v > best_iou) {
        best_iou = v;
        best = g;
      }
    }
    if (best) {
      used[*best] = true;
      tp[*pick] = true;
    }
  }
  if (gt_used_out) *gt_used_out = used;
  return tp;
}

/// Minimum total cost over every injective row->column assignment (rows <= cols),
/// or column->row assignment when there are more rows.
inline double min_assignment_cost(const std::vector<std::vector<double>>& cost) {
  const std::size_t rows = cost.size();
  const std::size_t cols = rows ? cost[0].size() : 0;
  if (rows == 0 || cols == 0) return 0.0;
  const bool transpose = rows > cols;
  const std::size_t r = transpose ? cols : rows;
  const std::size_t c = transpose ? rows : cols;
  auto at = [&](std::size_t i, std::size_t j) { return transpose ? cost[j][i] : cost[i][j]; };
  std::vector<std::size_t> perm(c);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < r; ++i) s += at(i, perm[i]);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Precision/recall/F1 at threshold `t` computed from scratch: predictions with
/// confidence >= t are re-matched from nothing.
struct Prf {
  double p, r, f1;
};

inline Prf prf_at(const std::vector<Pred>& preds, const std::vector<Gt>& gts, double thr, double t) {
  std::vector<Pred> kept;
  for (const auto& p : preds) {
    if (p.conf >= t) kept.push_back(p);
  }
  const auto flags = greedy_flags(kept, gts, thr);
  const double tp = static_cast<double>(std::count(flags.begin(), flags.end(), true));
  const double p = kept.empty() ? 0.0 : tp / static_cast<double>(kept.size());
  const double r = gts.empty() ? 0.0 : tp / static_cast<double>(gts.size());
  return {p, r, p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0};
}

}  // namespace oracle
