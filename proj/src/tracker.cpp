#include "co2stream/tracker.hpp"

#include <algorithm>
#include <cassert>

#include "co2stream/hungarian.hpp"

namespace co2stream {

namespace {

Eigen::Vector4d to_xyah(const BoundingBox& b) {
  const auto c = b.center();
  return {c.x(), c.y(), b.w / b.h, b.h};
}

bool in_open_unit(double v) { return v > 0.0 && v < 1.0; }

}  // namespace

const char* to_string(TrackState s) {
  switch (s) {
    case TrackState::Tentative: return "tentative";
    case TrackState::Active: return "active";
    case TrackState::Lost: return "lost";
    case TrackState::Removed: return "removed";
  }
  return "unknown";
}

bool is_legal_transition(TrackState from, TrackState to) {
  switch (from) {
    case TrackState::Tentative: return to == TrackState::Active || to == TrackState::Removed;
    case TrackState::Active: return to == TrackState::Lost;
    case TrackState::Lost: return to == TrackState::Active || to == TrackState::Removed;
    case TrackState::Removed: return false;
  }
  return false;
}

BoundingBox Track::predicted_box() const {
  const auto& m = kalman.mean;
  const double h = m(3);
  const double w = m(2) * h;
  return {m(0) - 0.5 * w, m(1) - 0.5 * h, w, h};
}

void TrackerConfig::validate() const {
  if (!in_open_unit(det_conf_floor)) throw ConfigError("tracker.det_conf_floor must lie in (0,1)");
  if (!in_open_unit(high_score_thresh)) throw ConfigError("tracker.high_score_thresh must lie in (0,1)");
  if (!in_open_unit(match_iou_thresh)) throw ConfigError("tracker.match_iou_thresh must lie in (0,1)");
  if (!in_open_unit(low_match_iou_thresh)) throw ConfigError("tracker.low_match_iou_thresh must lie in (0,1)");
  if (low_match_iou_thresh > match_iou_thresh) {
    throw ConfigError("tracker.low_match_iou_thresh must not exceed tracker.match_iou_thresh");
  }
  if (track_buffer_frames <= 0) throw ConfigError("tracker.track_buffer_frames must be positive");
  if (min_hits_to_activate <= 0) throw ConfigError("tracker.min_hits_to_activate must be positive");
  if (!(std_weight_position > 0.0) || !(std_weight_velocity > 0.0)) {
    throw ConfigError("tracker Kalman noise weights must be positive");
  }
}

std::vector<Match> min_cost_matching(std::span<const BoundingBox> tracks, std::span<const BoundingBox> detections,
                                     double min_iou) {
  std::vector<Match> out;
  if (tracks.empty() || detections.empty()) return out;
  Eigen::MatrixXd iou(tracks.size(), detections.size());
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    for (std::size_t j = 0; j < detections.size(); ++j) iou(i, j) = box_iou(tracks[i], detections[j]);
  }
  const Eigen::MatrixXd cost = Eigen::MatrixXd::Ones(iou.rows(), iou.cols()) - iou;
  const std::vector<int> assigned = solve_assignment(cost);
  for (std::size_t i = 0; i < assigned.size(); ++i) {
    if (assigned[i] < 0) continue;
    const double v = iou(i, assigned[i]);
    if (v >= min_iou) out.push_back({i, static_cast<std::size_t>(assigned[i]), v, 1});
  }
  return out;
}

Assignment associate(std::span<const Track> tracks, std::span<const Detection> detections, const TrackerConfig& cfg) {
  std::vector<std::size_t> high, low;
  for (std::size_t j = 0; j < detections.size(); ++j) {
    (detections[j].confidence >= cfg.high_score_thresh ? high : low).push_back(j);
  }
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    if (tracks[i].state != TrackState::Removed) pool.push_back(i);
  }

  auto boxes_of_tracks = [&](const std::vector<std::size_t>& idx) {
    std::vector<BoundingBox> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(tracks[i].predicted_box());
    return out;
  };
  auto boxes_of_dets = [&](const std::vector<std::size_t>& idx) {
    std::vector<BoundingBox> out;
    out.reserve(idx.size());
    for (auto j : idx) out.push_back(detections[j].box);
    return out;
  };

  Assignment result;
  std::vector<char> track_taken(tracks.size(), 0), det_taken(detections.size(), 0);

  for (const Match& m : min_cost_matching(boxes_of_tracks(pool), boxes_of_dets(high), cfg.match_iou_thresh)) {
    const std::size_t ti = pool[m.track];
    const std::size_t dj = high[m.detection];
    result.matches.push_back({ti, dj, m.iou, 1});
    track_taken[ti] = det_taken[dj] = 1;
  }

  std::vector<std::size_t> second;
  for (auto i : pool) {
    if (!track_taken[i] && tracks[i].state == TrackState::Active) second.push_back(i);
  }
  for (const Match& m : min_cost_matching(boxes_of_tracks(second), boxes_of_dets(low), cfg.low_match_iou_thresh)) {
    const std::size_t ti = second[m.track];
    const std::size_t dj = low[m.detection];
    result.matches.push_back({ti, dj, m.iou, 2});
    track_taken[ti] = det_taken[dj] = 1;
  }

  std::sort(result.matches.begin(), result.matches.end(),
            [](const Match& a, const Match& b) { return a.track < b.track; });
  for (auto i : pool) {
    if (!track_taken[i]) result.unmatched_tracks.push_back(i);
  }
  for (std::size_t j = 0; j < detections.size(); ++j) {
    if (!det_taken[j]) result.unmatched_detections.push_back(j);
  }
  return result;
}

void predict(Track& track, const KalmanFilterXYAH<double>& filter) {
  assert(track.state != TrackState::Removed);
  // Height velocity is frozen while the track is not being observed.
  if (track.state == TrackState::Lost) track.kalman.mean(7) = 0.0;
  filter.predict(track.kalman);
}

ByteTracker::ByteTracker(TrackerConfig cfg)
    : cfg_(cfg), filter_(cfg.std_weight_position, cfg.std_weight_velocity) {
  cfg_.validate();
}

void ByteTracker::transition(Track& t, TrackState to) {
  assert(is_legal_transition(t.state, to));
  t.state = to;
  if (to == TrackState::Active) t.ever_activated = true;
}

void ByteTracker::absorb(Track& t, const Detection& det, std::uint64_t frame, std::uint64_t ts_ms) {
  t.last_box = det.box;
  t.frames_since_update = 0;
  t.consecutive_hits += 1;
  t.last_frame = frame;
  t.label_votes[det.label] += 1;
  const auto c = det.box.center();
  // Timestamps may repeat across frames; keep the path strictly increasing in time.
  if (!t.centroid_path.empty() && t.centroid_path.back().timestamp_ms == ts_ms) {
    t.centroid_path.back() = {c.x(), c.y(), ts_ms};
  } else {
    t.centroid_path.push_back({c.x(), c.y(), ts_ms});
  }
  t.plate_reads.insert(t.plate_reads.end(), det.plate_candidates.begin(), det.plate_candidates.end());
}

std::vector<Emission> ByteTracker::step(const FrameRecord& frame) {
  if (last_frame_ && frame.frame_index <= *last_frame_) {
    throw OutOfOrderFrame("frame " + std::to_string(frame.frame_index) + " arrived after frame " +
                          std::to_string(*last_frame_));
  }
  last_frame_ = frame.frame_index;

  std::vector<Detection> dets;
  dets.reserve(frame.detections.size());
  for (const auto& d : frame.detections) {
    if (d.confidence >= cfg_.det_conf_floor) dets.push_back(d);
  }

  for (auto& t : tracks_) predict(t, filter_);

  const Assignment a = associate(tracks_, dets, cfg_);
  std::vector<std::pair<std::size_t, std::size_t>> emitted;  // (track index, det index)

  for (const Match& m : a.matches) {
    Track& t = tracks_[m.track];
    filter_.update(t.kalman, to_xyah(dets[m.detection].box));
    absorb(t, dets[m.detection], frame.frame_index, frame.timestamp_ms);
    if (t.state == TrackState::Lost) {
      transition(t, TrackState::Active);
    } else if (t.state == TrackState::Tentative && t.consecutive_hits >= cfg_.min_hits_to_activate) {
      transition(t, TrackState::Active);
    }
    if (t.state == TrackState::Active) emitted.emplace_back(m.track, m.detection);
  }

  for (auto i : a.unmatched_tracks) {
    Track& t = tracks_[i];
    t.frames_since_update += 1;
    t.consecutive_hits = 0;
    if (t.state == TrackState::Tentative) {
      transition(t, TrackState::Removed);
    } else {
      if (t.state == TrackState::Active) transition(t, TrackState::Lost);
      if (t.frames_since_update > cfg_.track_buffer_frames) transition(t, TrackState::Removed);
    }
  }

  for (auto j : a.unmatched_detections) {
    const Detection& d = dets[j];
    if (d.confidence < cfg_.high_score_thresh) continue;
    Track t;
    t.id = next_id_++;
    t.state = TrackState::Tentative;
    t.kalman = filter_.initiate(to_xyah(d.box));
    t.first_frame = frame.frame_index;
    absorb(t, d, frame.frame_index, frame.timestamp_ms);
    if (t.consecutive_hits >= cfg_.min_hits_to_activate) transition(t, TrackState::Active);
    tracks_.push_back(std::move(t));
    if (tracks_.back().state == TrackState::Active) emitted.emplace_back(tracks_.size() - 1, j);
  }

  std::vector<Emission> out;
  out.reserve(emitted.size());
  for (auto [ti, dj] : emitted) out.push_back({tracks_[ti].id, dets[dj]});
  std::sort(out.begin(), out.end(), [](const Emission& x, const Emission& y) { return x.track_id < y.track_id; });

  auto removed = std::stable_partition(tracks_.begin(), tracks_.end(),
                                       [](const Track& t) { return t.state != TrackState::Removed; });
  for (auto it = removed; it != tracks_.end(); ++it) {
    if (it->ever_activated) finished_.push_back(std::move(*it));
  }
  tracks_.erase(removed, tracks_.end());
  return out;
}

std::vector<Track> ByteTracker::take_finished() {
  std::vector<Track> out;
  out.swap(finished_);
  return out;
}

std::vector<Track> ByteTracker::flush() {
  for (auto& t : tracks_) {
    if (t.state == TrackState::Active) transition(t, TrackState::Lost);
    transition(t, TrackState::Removed);
    if (t.ever_activated) finished_.push_back(std::move(t));
  }
  tracks_.clear();
  return take_finished();
}

}  // namespace co2stream
