#include "co2stream/emission.hpp"

#include <cmath>

#include "co2stream/classmap.hpp"

namespace co2stream {

EmissionFactorTable EmissionFactorTable::defaults() {
  EmissionFactorTable t;
  t.set("Subcompact", "Gasoline", 115.0);
  for (const char* fuel : {"Gasoline", "Diesel"}) {
    t.set("Compact", fuel, 125.0);
    t.set("Midsize", fuel, 140.0);
    t.set("Full-size", fuel, 160.0);
    t.set("SUV", fuel, 180.0);
    t.set("Pickup", fuel, 200.0);
  }
  t.set("Luxury", "Gasoline", 170.0);
  t.set("Electric", "Electric", 0.0);
  t.set("Hybrid", "Hybrid", 90.0);
  return t;
}

void EmissionFactorTable::set(std::string_view vehicle_class, std::string_view fuel_type, double g_per_km) {
  if (!(g_per_km >= 0.0)) throw std::invalid_argument("emission factors must be >= 0");
  if (lowercase(fuel_type) == "electric" && g_per_km != 0.0) {
    throw std::invalid_argument("electric rows must have a zero factor");
  }
  rows_[{lowercase(vehicle_class), lowercase(fuel_type)}] =
      Row{std::string(vehicle_class), std::string(fuel_type), g_per_km};
}

std::optional<double> EmissionFactorTable::find(std::string_view vehicle_class, std::string_view fuel_type) const {
  auto it = rows_.find({lowercase(vehicle_class), lowercase(fuel_type)});
  if (it == rows_.end()) return std::nullopt;
  return it->second.g_per_km;
}

double EmissionFactorTable::factor_for(std::string_view vehicle_class, std::string_view fuel_type) const {
  if (auto f = find(vehicle_class, fuel_type)) return *f;
  throw UnknownClass("no emission factor for class '" + std::string(vehicle_class) + "' with fuel '" +
                     std::string(fuel_type) + "'");
}

std::vector<EmissionFactorTable::Row> EmissionFactorTable::rows() const {
  std::vector<Row> out;
  out.reserve(rows_.size());
  for (const auto& [key, row] : rows_) out.push_back(row);
  return out;
}

double CategoryDefaults::factor(const std::string& category) const {
  auto it = g_per_km.find(category);
  return it == g_per_km.end() ? unknown_category : it->second;
}

void Calibration::validate() const {
  if (!(meters_per_pixel > 0.0)) throw std::invalid_argument("calibration.meters_per_pixel must be > 0");
  if (!(fallback_speed_kmh > 0.0)) throw std::invalid_argument("calibration.fallback_speed_kmh must be > 0");
}

const char* to_string(FactorSource s) {
  switch (s) {
    case FactorSource::RegistryNumeric: return "RegistryNumeric";
    case FactorSource::TableLookup: return "TableLookup";
    case FactorSource::CategoryDefault: return "CategoryDefault";
  }
  return "Unknown";
}

const char* to_string(DistanceSource s) {
  switch (s) {
    case DistanceSource::Path: return "path";
    case DistanceSource::DwellFallback: return "dwell";
  }
  return "unknown";
}

TravelDistance travel_distance(std::span<const CentroidSample> path, const Calibration& cal) {
  TravelDistance d;
  if (path.empty()) return d;
  d.dwell_s = static_cast<double>(path.back().timestamp_ms - path.front().timestamp_ms) / 1000.0;
  if (path.size() < 2) {
    d.source = DistanceSource::DwellFallback;
    d.km = cal.fallback_speed_kmh * d.dwell_s / 3600.0;
    return d;
  }
  double pixels = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    pixels += std::hypot(path[i].cx - path[i - 1].cx, path[i].cy - path[i - 1].cy);
  }
  d.km = pixels * cal.meters_per_pixel / 1000.0;
  return d;
}

double distance_from_track(const Track& track, const Calibration& cal) {
  return travel_distance(track.centroid_path, cal).km;
}

VehicleEmissionEstimate estimate(const Track& track, const std::optional<VehicleRecord>& record,
                                 const std::string& category, const EmissionModel& model) {
  VehicleEmissionEstimate e;
  e.track_id = track.id;
  e.category = category;
  if (!track.centroid_path.empty()) {
    e.first_seen_ms = track.centroid_path.front().timestamp_ms;
    e.last_seen_ms = track.centroid_path.back().timestamp_ms;
  }
  const TravelDistance d = travel_distance(track.centroid_path, model.calibration);
  e.distance_km = d.km;
  e.dwell_s = d.dwell_s;
  e.distance_source = d.source;

  std::optional<double> table_factor;
  if (record) {
    e.plate = record->registration;
    e.vehicle_class = record->vehicle_class;
    e.fuel_type = record->fuel_type;
    table_factor = model.table.find(record->vehicle_class, record->fuel_type);
    // No tailpipe emissions regardless of body class.
    if (!table_factor && lowercase(record->fuel_type) == "electric") table_factor = 0.0;
  }
  if (record && record->co2_g_per_km) {
    e.factor_g_per_km = *record->co2_g_per_km;
    e.factor_source = FactorSource::RegistryNumeric;
  } else if (table_factor) {
    e.factor_g_per_km = *table_factor;
    e.factor_source = FactorSource::TableLookup;
  } else {
    e.factor_g_per_km = model.category_defaults.factor(category);
    e.factor_source = FactorSource::CategoryDefault;
  }
  e.co2_grams = e.factor_g_per_km * e.distance_km;
  return e;
}

SegmentReport aggregate(std::vector<VehicleEmissionEstimate> estimates, std::map<std::string, std::size_t> counts,
                        TimeWindow window) {
  SegmentReport r;
  r.window = window;
  r.unique_counts = std::move(counts);
  r.estimates = std::move(estimates);
  for (const auto& e : r.estimates) r.total_co2_grams += e.co2_grams;
  return r;
}

}  // namespace co2stream
