#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "co2stream/geometry.hpp"
#include "co2stream/ingest.hpp"
#include "co2stream/kalman.hpp"

namespace co2stream {

using TrackId = std::uint64_t;

enum class TrackState { Tentative, Active, Lost, Removed };

const char* to_string(TrackState s);
bool is_legal_transition(TrackState from, TrackState to);

struct CentroidSample {
  double cx = 0.0;
  double cy = 0.0;
  std::uint64_t timestamp_ms = 0;
};

struct Track {
  TrackId id = 0;
  TrackState state = TrackState::Tentative;
  KalmanState<double> kalman;
  std::map<std::string, int> label_votes;
  BoundingBox last_box;
  int frames_since_update = 0;
  int consecutive_hits = 0;
  bool ever_activated = false;
  std::uint64_t first_frame = 0;
  std::uint64_t last_frame = 0;
  std::vector<CentroidSample> centroid_path;
  std::vector<PlateCandidate> plate_reads;

  /// Box implied by the current Kalman mean.
  BoundingBox predicted_box() const;
};

struct TrackerConfig {
  double det_conf_floor = 0.25;
  double high_score_thresh = 0.5;
  double match_iou_thresh = 0.45;
  double low_match_iou_thresh = 0.3;
  int track_buffer_frames = 30;
  int min_hits_to_activate = 2;
  double std_weight_position = 1.0 / 20.0;
  double std_weight_velocity = 1.0 / 160.0;

  /// Throws ConfigError when a threshold leaves (0,1) or the IoU gates are inverted.
  void validate() const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OutOfOrderFrame : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Match {
  std::size_t track = 0;
  std::size_t detection = 0;
  double iou = 0.0;
  int stage = 1;
};

struct Assignment {
  std::vector<Match> matches;
  std::vector<std::size_t> unmatched_tracks;
  std::vector<std::size_t> unmatched_detections;
};

/// One-to-one minimum-cost matching of `tracks` to `detections` on cost 1 - IoU.
/// Pairs whose IoU falls below `min_iou` are dropped after solving. Indices refer
/// to positions in the input spans; returned pairs are ordered by track index.
std::vector<Match> min_cost_matching(std::span<const BoundingBox> tracks, std::span<const BoundingBox> detections,
                                     double min_iou);

/// Two-stage association. Tracks are matched using their predicted boxes.
Assignment associate(std::span<const Track> tracks, std::span<const Detection> detections, const TrackerConfig& cfg);

/// Advances the Kalman state one frame under the constant-velocity model.
void predict(Track& track, const KalmanFilterXYAH<double>& filter);

struct Emission {
  TrackId track_id = 0;
  Detection detection;
};

class ByteTracker {
 public:
  explicit ByteTracker(TrackerConfig cfg = {});

  /// Processes one frame; returns the (track, detection) pairs of activated tracks
  /// matched in this frame, ordered by track id.
  std::vector<Emission> step(const FrameRecord& frame);

  /// Removed tracks that were activated at least once, in removal order.
  std::vector<Track> take_finished();

  /// Ends the stream: every live activated track is finished and returned.
  std::vector<Track> flush();

  const std::vector<Track>& live_tracks() const { return tracks_; }
  const TrackerConfig& config() const { return cfg_; }

 private:
  void transition(Track& t, TrackState to);
  void absorb(Track& t, const Detection& det, std::uint64_t frame, std::uint64_t ts_ms);

  TrackerConfig cfg_;
  KalmanFilterXYAH<double> filter_;
  std::vector<Track> tracks_;
  std::vector<Track> finished_;
  TrackId next_id_ = 1;
  std::optional<std::uint64_t> last_frame_;
};

}  // namespace co2stream
