#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "co2stream/classmap.hpp"
#include "co2stream/config.hpp"
#include "co2stream/emission.hpp"
#include "co2stream/plate.hpp"
#include "co2stream/registry.hpp"
#include "co2stream/tracker.hpp"

namespace co2stream {

/// Registry access for a confirmed plate. May throw RegistryError.
using LookupFn = std::function<VehicleRecord(const NormalizedPlate&)>;

/// In-process lookup over fixture records; misses throw RegistryError(NotFound).
LookupFn fixture_lookup(std::vector<VehicleRecord> records);

struct VehicleResult {
  std::string category;
  PlateConsensus plate;
  std::optional<VehicleRecord> record;
  std::optional<std::string> lookup_error;
  VehicleEmissionEstimate estimate;
};

struct ProcessorStats {
  std::size_t frames = 0;
  std::size_t detections = 0;
  std::size_t vehicles = 0;
  std::size_t lookups = 0;
  std::size_t lookup_failures = 0;
  std::size_t peak_live_tracks = 0;
  std::size_t peak_pending_lookups = 0;
};

/// Frame-at-a-time driver for tracking, counting, plate consensus, registry lookup
/// and emission accounting.
///
/// A vehicle is finalized when its track is removed. Lookups for finalized vehicles
/// run on worker threads, at most `max_in_flight_lookups` at once, and are consumed
/// in completion-request order so output is deterministic. Reports are emitted as
/// soon as no live or pending vehicle can still fall into their window.
class StreamProcessor {
 public:
  using ReportSink = std::function<void(const SegmentReport&)>;
  using VehicleSink = std::function<void(const VehicleResult&)>;
  using WarningSink = std::function<void(const std::string&)>;

  StreamProcessor(PipelineConfig cfg, LookupFn lookup, ReportSink reports, VehicleSink vehicles = {},
                  WarningSink warn = {});
  ~StreamProcessor();

  /// Throws OutOfOrderFrame.
  void process(const FrameRecord& frame);
  /// Ends the stream and emits every remaining report.
  void finish();

  const ProcessorStats& stats() const { return stats_; }

 private:
  struct Pending {
    Track track;
    std::string category;
    PlateConsensus plate;
    std::optional<std::future<VehicleRecord>> lookup;
    std::int64_t window = 0;
  };
  struct WindowBucket {
    std::vector<VehicleEmissionEstimate> estimates;
    std::map<std::string, std::size_t> counts;
  };

  void enqueue(Track track);
  void resolve_front();
  void close_windows(bool final);
  std::int64_t window_of(std::uint64_t ts_ms) const;
  TimeWindow bounds(std::int64_t window) const;
  WindowBucket& bucket(std::int64_t window);

  PipelineConfig cfg_;
  LookupFn lookup_;
  ReportSink reports_;
  VehicleSink vehicles_;
  WarningSink warn_;
  ByteTracker tracker_;
  VehicleCounter counter_;
  std::deque<Pending> pending_;
  std::map<std::int64_t, WindowBucket> windows_;
  std::optional<std::int64_t> next_window_;
  std::optional<std::uint64_t> first_ts_;
  std::uint64_t last_ts_ = 0;
  ProcessorStats stats_;
  bool finished_ = false;
};

}  // namespace co2stream
