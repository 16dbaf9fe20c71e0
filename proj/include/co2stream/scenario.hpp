#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "co2stream/config.hpp"
#include "co2stream/emission.hpp"
#include "co2stream/ingest.hpp"
#include "co2stream/registry.hpp"

namespace co2stream::scenario {

/// Per-vehicle settings. Unset fields are drawn from the layout stream.
struct VehicleOverride {
  std::optional<std::string> category;
  std::optional<std::string> raw_label;
  std::optional<std::string> vehicle_class;
  std::optional<std::string> fuel_type;
  std::optional<std::string> plate;
  std::optional<double> co2_g_per_km;
  std::optional<std::uint64_t> entry_frame;
  std::optional<std::uint64_t> exit_frame;  ///< exclusive
  std::optional<double> speed_px_s;
};

struct ScenarioConfig {
  std::uint64_t seed = 7;
  int n_vehicles = 20;
  double frame_rate_hz = 25.0;
  double duration_s = 30.0;
  int image_width = 1920;
  int image_height = 1080;
  double lane_height_px = 120.0;
  double meters_per_pixel = 0.05;

  double dropout = 0.0;
  double box_jitter_px = 0.0;
  double ocr_corruption = 0.0;
  double plate_read_prob = 1.0;
  double conf_min = 0.6;
  double conf_max = 0.95;
  double plate_conf_min = 0.6;
  double plate_conf_max = 0.95;
  /// Share of cars whose registry record carries a numeric CO2 figure.
  double numeric_co2_fraction = 0.25;

  std::map<int, VehicleOverride> vehicles;

  /// Throws ConfigError.
  void validate() const;
  std::uint64_t frame_count() const;
};

/// Reads `scenario.*` keys, including `scenario.vehicle.<i>.<field>`.
ScenarioConfig scenario_config_from(const KeyValueConfig& kv);

struct VehiclePlan {
  int index = 0;
  std::string plate;
  std::string category;
  std::string raw_label;
  std::string make;
  std::string model;
  std::string vehicle_class;
  std::string fuel_type;
  std::optional<double> co2_g_per_km;
  std::uint64_t entry_frame = 0;
  std::uint64_t exit_frame = 0;
  double width = 0.0;
  double height = 0.0;
  double x0 = 0.0;  ///< box left edge at entry
  double y = 0.0;
  double velocity_px_s = 0.0;  ///< signed, along x

  double factor_g_per_km = 0.0;
  FactorSource factor_source = FactorSource::TableLookup;
  double distance_km = 0.0;
  double co2_grams = 0.0;

  double x_at(std::uint64_t frame, double rate_hz) const;
};

struct GroundTruth {
  std::vector<VehiclePlan> vehicles;
  std::map<std::string, std::size_t> unique_counts;
  double total_distance_km = 0.0;
  double total_co2_grams = 0.0;
};

/// Vehicle layout, registry records and exact expected outputs. Distances cover the
/// span between the first and last frame in which each vehicle is visible.
GroundTruth plan(const ScenarioConfig& cfg, const EmissionFactorTable& table = EmissionFactorTable::defaults());

std::vector<VehicleRecord> fixtures_for(const GroundTruth& gt);
std::string ground_truth_json(const ScenarioConfig& cfg, const GroundTruth& gt);

/// Emits frames one at a time so long streams never sit in memory.
class FrameGenerator {
 public:
  FrameGenerator(const ScenarioConfig& cfg, const GroundTruth& gt);
  std::optional<FrameRecord> next();

 private:
  const ScenarioConfig& cfg_;
  const GroundTruth& gt_;
  std::vector<std::size_t> by_entry_;
  std::size_t next_entry_ = 0;
  std::vector<std::size_t> active_;
  std::uint64_t frame_ = 0;
  std::uint64_t frame_count_ = 0;
  std::mt19937_64 noise_;
};

/// Writes the detection stream (JSONL), ground truth and registry fixtures.
void generate(const ScenarioConfig& cfg, std::ostream& stream, std::ostream& ground_truth, std::ostream& fixtures);

}  // namespace co2stream::scenario
