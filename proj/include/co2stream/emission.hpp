#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "co2stream/registry.hpp"
#include "co2stream/tracker.hpp"

namespace co2stream {

class UnknownClass : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// (vehicle class, fuel type) -> grams CO2 per km. Lookups ignore case.
class EmissionFactorTable {
 public:
  struct Row {
    std::string vehicle_class;
    std::string fuel_type;
    double g_per_km;
  };

  /// Average tailpipe factors by car segment. Rows listed as "Gas/Diesel" are
  /// stored once per fuel.
  static EmissionFactorTable defaults();

  void set(std::string_view vehicle_class, std::string_view fuel_type, double g_per_km);
  std::optional<double> find(std::string_view vehicle_class, std::string_view fuel_type) const;
  /// Throws UnknownClass when no row matches.
  double factor_for(std::string_view vehicle_class, std::string_view fuel_type) const;
  std::vector<Row> rows() const;

 private:
  std::map<std::pair<std::string, std::string>, Row> rows_;
};

inline double factor_for(std::string_view vehicle_class, std::string_view fuel_type, const EmissionFactorTable& t) {
  return t.factor_for(vehicle_class, fuel_type);
}

/// Factor used when a vehicle cannot be resolved beyond its broad category.
struct CategoryDefaults {
  std::map<std::string, double> g_per_km{{"car", 140.0}, {"truck", 200.0}, {"bus", 200.0}, {"motorcycle", 115.0}};
  double unknown_category = 140.0;

  double factor(const std::string& category) const;
};

struct Calibration {
  double meters_per_pixel = 0.05;
  double fallback_speed_kmh = 50.0;

  void validate() const;
};

enum class FactorSource { RegistryNumeric, TableLookup, CategoryDefault };
enum class DistanceSource { Path, DwellFallback };

const char* to_string(FactorSource s);
const char* to_string(DistanceSource s);

struct TravelDistance {
  double km = 0.0;
  double dwell_s = 0.0;
  DistanceSource source = DistanceSource::Path;
};

/// Path length of the centroid trail scaled to km; paths shorter than two points
/// fall back to assumed speed times dwell time.
TravelDistance travel_distance(std::span<const CentroidSample> path, const Calibration& cal);
double distance_from_track(const Track& track, const Calibration& cal);

struct VehicleEmissionEstimate {
  TrackId track_id = 0;
  std::optional<std::string> plate;
  std::string category;
  std::string vehicle_class;
  std::string fuel_type;
  double distance_km = 0.0;
  double dwell_s = 0.0;
  DistanceSource distance_source = DistanceSource::Path;
  double factor_g_per_km = 0.0;
  FactorSource factor_source = FactorSource::CategoryDefault;
  double co2_grams = 0.0;
  std::uint64_t first_seen_ms = 0;
  std::uint64_t last_seen_ms = 0;
};

struct EmissionModel {
  EmissionFactorTable table = EmissionFactorTable::defaults();
  CategoryDefaults category_defaults;
  Calibration calibration;
};

/// Factor precedence: registry numeric value, then table row for the registry's
/// class and fuel, then the category default.
VehicleEmissionEstimate estimate(const Track& track, const std::optional<VehicleRecord>& record,
                                 const std::string& category, const EmissionModel& model);

struct TimeWindow {
  std::uint64_t start_ms = 0;
  std::uint64_t end_ms = 0;
};

struct SegmentReport {
  TimeWindow window;
  std::map<std::string, std::size_t> unique_counts;
  std::vector<VehicleEmissionEstimate> estimates;
  double total_co2_grams = 0.0;
};

SegmentReport aggregate(std::vector<VehicleEmissionEstimate> estimates, std::map<std::string, std::size_t> counts,
                        TimeWindow window);

}  // namespace co2stream
