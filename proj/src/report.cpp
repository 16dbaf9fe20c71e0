#include "co2stream/report.hpp"

#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace co2stream {

namespace {

using json = nlohmann::json;

json estimate_to_json(const VehicleEmissionEstimate& e) {
  return {{"track_id", e.track_id},
          {"plate", e.plate ? json(*e.plate) : json(nullptr)},
          {"category", e.category},
          {"vehicle_class", e.vehicle_class},
          {"fuel_type", e.fuel_type},
          {"distance_km", e.distance_km},
          {"dwell_s", e.dwell_s},
          {"distance_source", to_string(e.distance_source)},
          {"factor_g_per_km", e.factor_g_per_km},
          {"factor_source", to_string(e.factor_source)},
          {"co2_grams", e.co2_grams},
          {"first_seen_ms", e.first_seen_ms},
          {"last_seen_ms", e.last_seen_ms}};
}

json window_json(const TimeWindow& w) { return {{"start_ms", w.start_ms}, {"end_ms", w.end_ms}}; }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string num(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

}  // namespace

ReportFormat parse_report_format(const std::string& s) {
  if (s == "json") return ReportFormat::Json;
  if (s == "csv") return ReportFormat::Csv;
  throw std::invalid_argument("format must be json or csv, got '" + s + "'");
}

std::string estimate_json(const VehicleEmissionEstimate& e) { return estimate_to_json(e).dump(); }

std::string segment_json(const SegmentReport& r) {
  json estimates = json::array();
  for (const auto& e : r.estimates) estimates.push_back(estimate_to_json(e));
  return json{{"window", window_json(r.window)},
              {"unique_counts", r.unique_counts},
              {"estimates", std::move(estimates)},
              {"total_co2_grams", r.total_co2_grams}}
      .dump();
}

std::string vehicle_result_json(const VehicleResult& r) {
  json j = {{"track_id", r.estimate.track_id},
            {"category", r.category},
            {"plate", r.plate.plate ? json(r.plate.plate->text()) : json(nullptr)},
            {"status", to_string(r.plate.status)},
            {"support", r.plate.support},
            {"score", r.plate.score},
            {"first_seen_ms", r.estimate.first_seen_ms},
            {"last_seen_ms", r.estimate.last_seen_ms}};
  if (r.record) j["registry"] = json::parse(vehicle_record_json(*r.record));
  if (r.lookup_error) j["lookup_error"] = *r.lookup_error;
  return j.dump();
}

ReportWriter::ReportWriter(std::ostream& out, ReportFormat format, bool counts_only)
    : out_(out), format_(format), counts_only_(counts_only) {
  if (format_ == ReportFormat::Json) {
    out_ << "{\"segments\":[";
  } else if (counts_only_) {
    out_ << "window_start_ms,window_end_ms,category,count\n";
  } else {
    out_ << "window_start_ms,window_end_ms,track_id,plate,category,vehicle_class,fuel_type,distance_km,dwell_s,"
            "distance_source,factor_g_per_km,factor_source,co2_grams\n";
  }
}

void ReportWriter::write(const SegmentReport& r) {
  for (const auto& [cat, n] : r.unique_counts) counts_[cat] += n;
  vehicles_ += r.estimates.size();
  for (const auto& e : r.estimates) distance_ += e.distance_km;
  co2_ += r.total_co2_grams;

  if (format_ == ReportFormat::Json) {
    if (!first_) out_ << ',';
    if (counts_only_) {
      out_ << json{{"window", window_json(r.window)}, {"unique_counts", r.unique_counts}}.dump();
    } else {
      out_ << segment_json(r);
    }
  } else if (counts_only_) {
    for (const auto& [cat, n] : r.unique_counts) {
      out_ << r.window.start_ms << ',' << r.window.end_ms << ',' << csv_field(cat) << ',' << n << '\n';
    }
  } else {
    for (const auto& e : r.estimates) {
      out_ << r.window.start_ms << ',' << r.window.end_ms << ',' << e.track_id << ','
           << csv_field(e.plate.value_or("")) << ',' << csv_field(e.category) << ',' << csv_field(e.vehicle_class)
           << ',' << csv_field(e.fuel_type) << ',' << num(e.distance_km) << ',' << num(e.dwell_s) << ','
           << to_string(e.distance_source) << ',' << num(e.factor_g_per_km) << ',' << to_string(e.factor_source)
           << ',' << num(e.co2_grams) << '\n';
    }
  }
  first_ = false;
  out_.flush();
}

void ReportWriter::close() {
  if (closed_) return;
  closed_ = true;
  if (format_ == ReportFormat::Json) {
    json totals = {{"unique_counts", counts_}, {"vehicles", vehicles_}};
    if (!counts_only_) {
      totals["distance_km"] = distance_;
      totals["co2_grams"] = co2_;
    }
    out_ << "],\"totals\":" << totals.dump() << "}\n";
  } else if (counts_only_) {
    for (const auto& [cat, n] : counts_) out_ << "TOTAL,," << csv_field(cat) << ',' << n << '\n';
  } else {
    out_ << "TOTAL,," << vehicles_ << ",,,,," << num(distance_) << ",,,,," << num(co2_) << '\n';
  }
  out_.flush();
}

}  // namespace co2stream
