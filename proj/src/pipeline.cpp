#include "co2stream/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>

namespace co2stream {

LookupFn fixture_lookup(std::vector<VehicleRecord> records) {
  auto index = std::make_shared<std::map<std::string, VehicleRecord>>();
  for (auto& r : records) index->emplace(r.registration, std::move(r));
  return [index](const NormalizedPlate& plate) {
    auto it = index->find(plate.text());
    if (it == index->end()) throw RegistryError(RegistryError::Kind::NotFound, "no record for " + plate.text());
    return it->second;
  };
}

StreamProcessor::StreamProcessor(PipelineConfig cfg, LookupFn lookup, ReportSink reports, VehicleSink vehicles,
                                 WarningSink warn)
    : cfg_(std::move(cfg)),
      lookup_(std::move(lookup)),
      reports_(std::move(reports)),
      vehicles_(std::move(vehicles)),
      warn_(std::move(warn)),
      tracker_(cfg_.tracker),
      counter_(cfg_.classmap.categories()) {
  cfg_.validate();
}

StreamProcessor::~StreamProcessor() = default;

std::int64_t StreamProcessor::window_of(std::uint64_t ts_ms) const {
  if (cfg_.window_s <= 0.0) return 0;
  const auto width = std::max<std::int64_t>(1, std::llround(cfg_.window_s * 1000.0));
  return static_cast<std::int64_t>(ts_ms) / width;
}

TimeWindow StreamProcessor::bounds(std::int64_t window) const {
  if (cfg_.window_s <= 0.0) return {first_ts_.value_or(0), last_ts_};
  const auto width = std::max<std::int64_t>(1, std::llround(cfg_.window_s * 1000.0));
  return {static_cast<std::uint64_t>(window * width), static_cast<std::uint64_t>((window + 1) * width)};
}

StreamProcessor::WindowBucket& StreamProcessor::bucket(std::int64_t window) {
  auto [it, inserted] = windows_.try_emplace(window);
  if (inserted) {
    for (const auto& c : cfg_.classmap.categories()) it->second.counts[c] = 0;
  }
  return it->second;
}

void StreamProcessor::process(const FrameRecord& frame) {
  if (finished_) throw std::logic_error("StreamProcessor::process after finish");
  const auto emissions = tracker_.step(frame);
  if (!first_ts_) first_ts_ = frame.timestamp_ms;
  last_ts_ = std::max(last_ts_, frame.timestamp_ms);
  stats_.frames += 1;
  stats_.detections += frame.detections.size();

  for (const auto& e : emissions) counter_.record(e.track_id, map_label(e.detection.label, cfg_.classmap));
  for (auto& t : tracker_.take_finished()) enqueue(std::move(t));
  stats_.peak_live_tracks = std::max(stats_.peak_live_tracks, tracker_.live_tracks().size());

  while (!pending_.empty() && (!pending_.front().lookup || pending_.front().lookup->wait_for(std::chrono::seconds(0)) ==
                                                               std::future_status::ready)) {
    resolve_front();
  }
  close_windows(false);
}

void StreamProcessor::enqueue(Track track) {
  Pending p;
  if (auto c = counter_.release(track.id)) {
    p.category = *c;
  } else {
    // Never emitted: fall back to the raw labels the track absorbed.
    auto best = std::max_element(track.label_votes.begin(), track.label_votes.end(),
                                 [](const auto& a, const auto& b) { return a.second < b.second; });
    p.category = best == track.label_votes.end() ? "unknown" : map_label(best->first, cfg_.classmap);
  }
  p.plate = consensus(track.plate_reads, cfg_.plate);
  p.window = window_of(track.centroid_path.empty() ? last_ts_ : track.centroid_path.back().timestamp_ms);

  if (lookup_ && p.plate.status == ConsensusStatus::Confirmed) {
    auto in_flight = [&] {
      return static_cast<int>(std::count_if(pending_.begin(), pending_.end(), [](const Pending& q) {
        return q.lookup.has_value();
      }));
    };
    while (in_flight() >= cfg_.max_in_flight_lookups) resolve_front();
    const NormalizedPlate plate = *p.plate.plate;
    p.lookup = std::async(std::launch::async, [this, plate] { return lookup_(plate); });
  }
  p.track = std::move(track);
  pending_.push_back(std::move(p));
  stats_.peak_pending_lookups = std::max(stats_.peak_pending_lookups, pending_.size());
}

void StreamProcessor::resolve_front() {
  Pending p = std::move(pending_.front());
  pending_.pop_front();

  VehicleResult r;
  r.category = p.category;
  r.plate = p.plate;
  if (p.lookup) {
    stats_.lookups += 1;
    try {
      r.record = p.lookup->get();
    } catch (const std::exception& e) {
      stats_.lookup_failures += 1;
      r.lookup_error = e.what();
      if (warn_) {
        warn_("registry lookup for " + p.plate.plate->text() + " failed (" + e.what() +
              "); using category default");
      }
    }
  }
  r.estimate = estimate(p.track, r.record, r.category, cfg_.emission);
  if (!r.estimate.plate && p.plate.status == ConsensusStatus::Confirmed) r.estimate.plate = p.plate.plate->text();

  if (next_window_ && p.window < *next_window_) p.window = *next_window_;
  auto& b = bucket(p.window);
  b.estimates.push_back(r.estimate);
  b.counts[r.category] += 1;
  stats_.vehicles += 1;
  if (vehicles_) vehicles_(r);
}

void StreamProcessor::close_windows(bool final) {
  if (cfg_.window_s <= 0.0) {
    if (!final) return;
    auto& b = bucket(0);
    if (reports_) reports_(aggregate(std::move(b.estimates), std::move(b.counts), bounds(0)));
    windows_.clear();
    return;
  }
  if (!first_ts_) return;
  if (!next_window_) next_window_ = window_of(*first_ts_);

  std::int64_t last = window_of(last_ts_);
  if (final && !windows_.empty()) last = std::max(last, windows_.rbegin()->first);

  while (*next_window_ <= last) {
    const std::int64_t w = *next_window_;
    const TimeWindow tw = bounds(w);
    if (!final) {
      if (last_ts_ < tw.end_ms) return;
      for (const auto& t : tracker_.live_tracks()) {
        if (t.ever_activated && !t.centroid_path.empty() && t.centroid_path.back().timestamp_ms < tw.end_ms) return;
      }
      while (std::any_of(pending_.begin(), pending_.end(), [&](const Pending& q) { return q.window <= w; })) {
        resolve_front();
      }
    }
    auto& b = bucket(w);
    if (reports_) reports_(aggregate(std::move(b.estimates), std::move(b.counts), tw));
    windows_.erase(w);
    ++*next_window_;
  }
}

void StreamProcessor::finish() {
  if (finished_) return;
  for (auto& t : tracker_.flush()) enqueue(std::move(t));
  while (!pending_.empty()) resolve_front();
  close_windows(true);
  finished_ = true;
}

}  // namespace co2stream
