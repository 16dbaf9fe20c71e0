#pragma once

#include <map>
#include <ostream>
#include <string>

#include "co2stream/emission.hpp"
#include "co2stream/pipeline.hpp"

namespace co2stream {

enum class ReportFormat { Json, Csv };

/// Throws std::invalid_argument for anything but "json" or "csv".
ReportFormat parse_report_format(const std::string& s);

std::string estimate_json(const VehicleEmissionEstimate& e);
std::string segment_json(const SegmentReport& r);

/// Streams segment reports as they close.
///
/// JSON: {"segments":[...],"totals":{"unique_counts":{...},"vehicles":n,"distance_km":..,"co2_grams":..}}
/// CSV:  one row per vehicle estimate, then a TOTAL row.
/// With `counts_only`, segments carry only their window and counts (CSV: one row per category).
class ReportWriter {
 public:
  ReportWriter(std::ostream& out, ReportFormat format, bool counts_only = false);

  void write(const SegmentReport& r);
  void close();

  const std::map<std::string, std::size_t>& total_counts() const { return counts_; }
  double total_co2_grams() const { return co2_; }

 private:
  std::ostream& out_;
  ReportFormat format_;
  bool counts_only_;
  bool first_ = true;
  bool closed_ = false;
  std::map<std::string, std::size_t> counts_;
  std::size_t vehicles_ = 0;
  double distance_ = 0.0;
  double co2_ = 0.0;
};

std::string vehicle_result_json(const VehicleResult& r);

}  // namespace co2stream
