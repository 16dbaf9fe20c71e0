#include <gtest/gtest.h>

#include <random>

#include "co2stream/emission.hpp"

using namespace co2stream;

namespace {

Track track_along(std::vector<std::pair<double, double>> pts, std::uint64_t dt_ms = 40) {
  Track t;
  t.id = 1;
  std::uint64_t ts = 0;
  for (auto [x, y] : pts) {
    t.centroid_path.push_back({x, y, ts});
    ts += dt_ms;
  }
  return t;
}

// Straight horizontal path of `km` kilometers at the default 0.05 m/px.
Track track_of_km(double km) { return track_along({{0, 0}, {km * 1000.0 / 0.05, 0}}); }

VehicleRecord record(std::string cls, std::string fuel, std::optional<double> co2 = std::nullopt) {
  return {"AB12CDE", "MAKE", "MODEL", std::move(fuel), std::move(cls), co2};
}

}  // namespace

TEST(FactorTable, ReproducesAllRows) {
  const auto t = EmissionFactorTable::defaults();
  const std::vector<std::tuple<const char*, const char*, double>> rows = {
      {"Subcompact", "Gasoline", 115}, {"Compact", "Gasoline", 125}, {"Compact", "Diesel", 125},
      {"Midsize", "Gasoline", 140},    {"Midsize", "Diesel", 140},   {"Full-size", "Gasoline", 160},
      {"Full-size", "Diesel", 160},    {"SUV", "Gasoline", 180},     {"SUV", "Diesel", 180},
      {"Pickup", "Gasoline", 200},     {"Pickup", "Diesel", 200},    {"Luxury", "Gasoline", 170},
      {"Electric", "Electric", 0},     {"Hybrid", "Hybrid", 90},
  };
  for (const auto& [cls, fuel, g] : rows) EXPECT_EQ(t.factor_for(cls, fuel), g) << cls << "/" << fuel;
  EXPECT_EQ(t.rows().size(), rows.size());
}

TEST(FactorTable, Examples) {
  const auto t = EmissionFactorTable::defaults();
  EXPECT_EQ(factor_for("SUV", "Diesel", t), 180.0);
  EXPECT_EQ(factor_for("Electric", "Electric", t), 0.0);
  EXPECT_EQ(factor_for("Hybrid", "Hybrid", t), 90.0);
  EXPECT_EQ(factor_for("suv", "DIESEL", t), 180.0);
}

TEST(FactorTable, UnknownAndInvalid) {
  auto t = EmissionFactorTable::defaults();
  EXPECT_THROW(t.factor_for("Tractor", "Diesel"), UnknownClass);
  EXPECT_THROW(t.factor_for("Luxury", "Diesel"), UnknownClass);
  EXPECT_THROW(t.set("Compact", "Electric", 10), std::invalid_argument);
  EXPECT_THROW(t.set("Compact", "Gasoline", -1), std::invalid_argument);
}

TEST(Distance, ThreeFourFive) {
  Calibration cal;
  cal.meters_per_pixel = 0.1;
  const auto d = travel_distance(track_along({{0, 0}, {300, 400}}).centroid_path, cal);
  EXPECT_NEAR(d.km, 0.05, 1e-15);
  EXPECT_EQ(d.source, DistanceSource::Path);
}

TEST(Distance, SinglePointIsZero) {
  for (double mpp : {0.01, 1.0, 10.0}) {
    Calibration cal;
    cal.meters_per_pixel = mpp;
    const auto d = travel_distance(track_along({{5, 5}}).centroid_path, cal);
    EXPECT_EQ(d.km, 0.0);
    EXPECT_EQ(d.source, DistanceSource::DwellFallback);
  }
}

TEST(Distance, StationaryIsZero) {
  std::vector<std::pair<double, double>> pts(10, {42.0, 17.0});
  EXPECT_EQ(distance_from_track(track_along(pts), Calibration{}), 0.0);
}

TEST(Estimate, TableLookup) {
  const auto e = estimate(track_of_km(2.0), record("SUV", "Diesel"), "car", EmissionModel{});
  EXPECT_NEAR(e.co2_grams, 360.0, 1e-9);
  EXPECT_EQ(e.factor_source, FactorSource::TableLookup);
  EXPECT_EQ(e.plate, "AB12CDE");
}

TEST(Estimate, RegistryNumericWins) {
  const auto e = estimate(track_of_km(1.0), record("SUV", "Diesel", 120.0), "car", EmissionModel{});
  EXPECT_NEAR(e.co2_grams, 120.0, 1e-9);
  EXPECT_EQ(e.factor_source, FactorSource::RegistryNumeric);
}

TEST(Estimate, CategoryDefaultAtZeroDistance) {
  const auto e = estimate(track_along({{0, 0}}), std::nullopt, "car", EmissionModel{});
  EXPECT_EQ(e.co2_grams, 0.0);
  EXPECT_EQ(e.factor_g_per_km, 140.0);
  EXPECT_EQ(e.factor_source, FactorSource::CategoryDefault);
}

TEST(Estimate, UnknownClassFallsBackToCategory) {
  const auto e = estimate(track_of_km(1.0), record("Tractor", "Diesel"), "truck", EmissionModel{});
  EXPECT_EQ(e.factor_source, FactorSource::CategoryDefault);
  EXPECT_NEAR(e.co2_grams, 200.0, 1e-9);
}

TEST(Estimate, ElectricBodyClassIsZero) {
  const auto e = estimate(track_of_km(1.0), record("Compact", "Electric"), "car", EmissionModel{});
  EXPECT_EQ(e.factor_source, FactorSource::TableLookup);
  EXPECT_EQ(e.co2_grams, 0.0);
}

TEST(Estimate, MonotoneInDistance) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> km(0.0, 5.0);
  const EmissionModel m;
  for (int i = 0; i < 500; ++i) {
    double a = km(rng), b = km(rng);
    if (a > b) std::swap(a, b);
    for (const auto& rec : {std::optional<VehicleRecord>{}, std::optional{record("Midsize", "Gasoline")}}) {
      EXPECT_LE(estimate(track_of_km(a), rec, "bus", m).co2_grams, estimate(track_of_km(b), rec, "bus", m).co2_grams);
    }
  }
}

TEST(Estimate, ScaleEquivariance) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> pos(0, 1000);
  EmissionModel m1, m2;
  m2.calibration.meters_per_pixel = 2 * m1.calibration.meters_per_pixel;
  for (int i = 0; i < 200; ++i) {
    std::vector<std::pair<double, double>> pts;
    for (int k = 0; k < 2 + static_cast<int>(rng() % 8); ++k) pts.emplace_back(pos(rng), pos(rng));
    const Track t = track_along(pts);
    const auto rec = record("Full-size", "Diesel");
    const auto a = estimate(t, rec, "car", m1);
    const auto b = estimate(t, rec, "car", m2);
    EXPECT_NEAR(b.distance_km, 2 * a.distance_km, 1e-12 * (1 + a.distance_km));
    EXPECT_NEAR(b.co2_grams, 2 * a.co2_grams, 1e-9 * (1 + a.co2_grams));
  }
}

TEST(Aggregate, Sums) {
  EXPECT_EQ(aggregate({}, {}, {}).total_co2_grams, 0.0);
  std::vector<VehicleEmissionEstimate> es(3);
  es[0].co2_grams = 360;
  es[1].co2_grams = 120;
  es[2].co2_grams = 0;
  const auto r = aggregate(es, {{"car", 3}}, {0, 1000});
  EXPECT_EQ(r.total_co2_grams, 480.0);
  EXPECT_EQ(r.unique_counts.at("car"), 3u);
  EXPECT_EQ(r.window.end_ms, 1000u);
}

TEST(Aggregate, SplitWindowIsAdditive) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> g(0, 500);
  for (int t = 0; t < 100; ++t) {
    std::vector<VehicleEmissionEstimate> es(1 + rng() % 20);
    for (auto& e : es) e.co2_grams = g(rng);
    const std::size_t cut = rng() % (es.size() + 1);
    std::vector<VehicleEmissionEstimate> left(es.begin(), es.begin() + cut), right(es.begin() + cut, es.end());
    const double whole = aggregate(es, {}, {}).total_co2_grams;
    const double parts = aggregate(left, {}, {}).total_co2_grams + aggregate(right, {}, {}).total_co2_grams;
    EXPECT_NEAR(whole, parts, 1e-9 * whole);
  }
}

TEST(Calibration, Validates) {
  Calibration c;
  c.meters_per_pixel = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.meters_per_pixel = 0.1;
  c.fallback_speed_kmh = -1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}
