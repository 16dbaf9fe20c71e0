#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "co2stream/config.hpp"
#include "co2stream/scenario.hpp"

using namespace co2stream;
using namespace co2stream::scenario;

namespace {

std::string stream_of(const ScenarioConfig& cfg) {
  std::ostringstream s, g, f;
  generate(cfg, s, g, f);
  return s.str() + "\n--\n" + g.str() + "\n--\n" + f.str();
}

std::vector<FrameRecord> frames_of(const ScenarioConfig& cfg, const GroundTruth& gt) {
  FrameGenerator gen(cfg, gt);
  std::vector<FrameRecord> out;
  while (auto f = gen.next()) out.push_back(*f);
  return out;
}

}  // namespace

TEST(Scenario, SameSeedSameBytes) {
  ScenarioConfig cfg;
  cfg.seed = 99;
  cfg.dropout = 0.2;
  cfg.ocr_corruption = 0.1;
  cfg.box_jitter_px = 2.0;
  EXPECT_EQ(stream_of(cfg), stream_of(cfg));
  ScenarioConfig other = cfg;
  other.seed = 100;
  EXPECT_NE(stream_of(cfg), stream_of(other));
}

TEST(Scenario, NoiseDoesNotMoveTheLayout) {
  ScenarioConfig clean;
  ScenarioConfig noisy = clean;
  noisy.dropout = 0.3;
  noisy.ocr_corruption = 0.2;
  const auto a = plan(clean), b = plan(noisy);
  ASSERT_EQ(a.vehicles.size(), b.vehicles.size());
  for (std::size_t i = 0; i < a.vehicles.size(); ++i) {
    EXPECT_EQ(a.vehicles[i].plate, b.vehicles[i].plate);
    EXPECT_EQ(a.vehicles[i].x0, b.vehicles[i].x0);
  }
  EXPECT_EQ(a.total_co2_grams, b.total_co2_grams);
}

TEST(Scenario, FullDropoutEmptiesEveryFrame) {
  ScenarioConfig cfg;
  cfg.dropout = 1.0;
  cfg.duration_s = 4;
  const auto frames = frames_of(cfg, plan(cfg));
  EXPECT_EQ(frames.size(), cfg.frame_count());
  for (const auto& f : frames) EXPECT_TRUE(f.detections.empty());
}

TEST(Scenario, SingleVehicleClosedForm) {
  ScenarioConfig cfg;
  cfg.n_vehicles = 1;
  cfg.duration_s = 7.3;
  cfg.frame_rate_hz = 10;
  const auto gt = plan(cfg);
  const auto frames = frames_of(cfg, gt);
  const std::size_t expect = static_cast<std::size_t>(std::ceil(7.3 * 10));
  ASSERT_EQ(frames.size(), expect);
  std::size_t seen = 0;
  double first_cx = 0, last_cx = 0;
  for (const auto& f : frames) {
    ASSERT_LE(f.detections.size(), 1u);
    if (f.detections.empty()) continue;
    const double cx = f.detections[0].box.center().x();
    if (seen++ == 0) first_cx = cx;
    last_cx = cx;
  }
  EXPECT_EQ(seen, expect);
  const auto& v = gt.vehicles.at(0);
  // Distance spans first to last visible frame: |v| * (n - 1) / rate.
  const double want_km = std::abs(v.velocity_px_s) * (expect - 1) / cfg.frame_rate_hz * cfg.meters_per_pixel / 1000.0;
  EXPECT_NEAR(v.distance_km, want_km, 1e-12);
  EXPECT_NEAR(std::abs(last_cx - first_cx) * cfg.meters_per_pixel / 1000.0, want_km, 1e-9);
  EXPECT_NEAR(v.co2_grams, v.factor_g_per_km * v.distance_km, 1e-9);
}

TEST(Scenario, PlanInvariants) {
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    ScenarioConfig cfg;
    cfg.seed = seed;
    cfg.n_vehicles = 40;
    const auto gt = plan(cfg);
    std::set<std::string> plates;
    double co2 = 0, dist = 0;
    std::map<std::string, std::size_t> counts;
    for (const auto& v : gt.vehicles) {
      EXPECT_TRUE(plates.insert(v.plate).second);
      EXPECT_EQ(normalize(v.plate).text(), v.plate);
      EXPECT_EQ(format_score(normalize(v.plate)), 2);
      EXPECT_LT(v.entry_frame + 1, v.exit_frame);
      EXPECT_LE(v.exit_frame, cfg.frame_count());
      EXPECT_GE(v.x0, 0.0);
      EXPECT_LE(v.x0 + v.width, cfg.image_width);
      if (v.fuel_type == "Electric") {
        EXPECT_EQ(v.co2_grams, 0.0);
      }
      co2 += v.co2_grams;
      dist += v.distance_km;
      ++counts[v.category];
    }
    EXPECT_NEAR(gt.total_co2_grams, co2, 1e-9);
    EXPECT_NEAR(gt.total_distance_km, dist, 1e-12);
    EXPECT_EQ(gt.unique_counts, counts);
  }
}

TEST(Scenario, BoxesStayInsideTheImage) {
  ScenarioConfig cfg;
  cfg.seed = 5;
  cfg.n_vehicles = 5;
  cfg.duration_s = 10;
  const auto gt = plan(cfg);
  FrameGenerator gen(cfg, gt);
  while (auto f = gen.next()) {
    for (const auto& d : f->detections) {
      ASSERT_GE(d.box.x, 0.0) << f->frame_index;
      ASSERT_LE(d.box.x + d.box.w, cfg.image_width + 1e-9) << f->frame_index;
    }
  }
}

TEST(Scenario, GroundTruthJsonAndFixturesAgree) {
  ScenarioConfig cfg;
  const auto gt = plan(cfg);
  const auto j = nlohmann::json::parse(ground_truth_json(cfg, gt));
  EXPECT_EQ(j.at("vehicles").size(), gt.vehicles.size());
  EXPECT_DOUBLE_EQ(j.at("totals").at("co2_grams").get<double>(), gt.total_co2_grams);
  const auto fx = fixtures_for(gt);
  ASSERT_EQ(fx.size(), gt.vehicles.size());
  for (const auto& r : fx) EXPECT_EQ(parse_vehicle_record(vehicle_record_json(r)), r);
}

TEST(Scenario, OverridesApply) {
  auto kv = KeyValueConfig::parse(
      "scenario.seed = 3\n"
      "scenario.n_vehicles = 2\n"
      "scenario.vehicle.0.plate = AB12CDE\n"
      "scenario.vehicle.0.vehicle_class = SUV\n"
      "scenario.vehicle.0.fuel_type = Diesel\n"
      "scenario.vehicle.0.category = car\n"
      "scenario.vehicle.1.category = car\n"
      "scenario.vehicle.1.vehicle_class = Midsize\n"
      "scenario.vehicle.1.fuel_type = Gasoline\n"
      "scenario.vehicle.1.co2_g_per_km = 321\n");
  const auto cfg = scenario_config_from(kv);
  EXPECT_EQ(cfg.seed, 3u);
  const auto gt = plan(cfg);
  EXPECT_EQ(gt.vehicles[0].plate, "AB12CDE");
  EXPECT_EQ(gt.vehicles[0].factor_g_per_km, 180.0);
  EXPECT_EQ(gt.vehicles[1].factor_g_per_km, 321.0);
  EXPECT_EQ(gt.vehicles[1].factor_source, FactorSource::RegistryNumeric);
}

TEST(Scenario, RejectsImpossibleConfigs) {
  ScenarioConfig cfg;
  cfg.dropout = 1.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.n_vehicles = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.n_vehicles = 2000;
  cfg.duration_s = 1;
  EXPECT_THROW(plan(cfg), ConfigError);
  EXPECT_THROW(scenario_config_from(KeyValueConfig::parse("scenario.frame_rate_hz = fast\n")), ConfigError);
  EXPECT_THROW(scenario_config_from(KeyValueConfig::parse("scenario.fps = 25\n")), ConfigError);
}
