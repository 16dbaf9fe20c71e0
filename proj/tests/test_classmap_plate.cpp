#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "co2stream/classmap.hpp"
#include "co2stream/plate.hpp"

using namespace co2stream;

TEST(MapLabel, Defaults) {
  const auto m = CategoryMap::defaults();
  EXPECT_EQ(map_label("suv", m), "car");
  EXPECT_EQ(map_label("BUS", m), "bus");
  EXPECT_EQ(map_label("van", m), "truck");
  EXPECT_EQ(map_label("pickup", m), "truck");
  EXPECT_EQ(map_label("Taxi", m), "car");
  EXPECT_EQ(map_label("private-car", m), "car");
  EXPECT_EQ(map_label("Government-car", m), "car");
  EXPECT_EQ(map_label("minibus", m), "bus");
  EXPECT_EQ(map_label("motorbike", m), "motorcycle");
  EXPECT_EQ(map_label("truck", m), "truck");
}

TEST(MapLabel, StrictRejectsUnknown) {
  auto m = CategoryMap::defaults();
  m.strict = true;
  EXPECT_THROW(map_label("hovercraft", m), UnknownLabel);
}

TEST(MapLabel, FallbackAndPassthrough) {
  auto m = CategoryMap::defaults();
  EXPECT_EQ(map_label("Hovercraft", m), "hovercraft");
  m.fallback = "other";
  EXPECT_EQ(map_label("hovercraft", m), "other");
}

TEST(VehicleCounter, Idempotent) {
  VehicleCounter c;
  c.record(7, "car");
  c.record(7, "car");
  EXPECT_EQ(c.counts()["car"], 1u);
}

TEST(VehicleCounter, DistinctIds) {
  VehicleCounter c;
  c.record(7, "car");
  c.record(8, "car");
  EXPECT_EQ(c.counts()["car"], 2u);
}

TEST(VehicleCounter, MajorityVote) {
  VehicleCounter c;
  for (int i = 0; i < 3; ++i) c.record(7, "car");
  c.record(7, "truck");
  EXPECT_EQ(c.category_of(7), "car");
  EXPECT_EQ(c.counts()["car"], 1u);
  EXPECT_EQ(c.counts()["truck"], 0u);
}

TEST(VehicleCounter, TieGoesToMostRecent) {
  VehicleCounter c;
  c.record(1, "car");
  c.record(1, "truck");
  EXPECT_EQ(c.category_of(1), "truck");
  c.record(1, "car");
  EXPECT_EQ(c.category_of(1), "car");
}

TEST(VehicleCounter, EmptyIsAllZero) {
  VehicleCounter c({"car", "bus"});
  for (const auto& [k, v] : c.counts()) EXPECT_EQ(v, 0u);
  EXPECT_EQ(c.counts().size(), 2u);
}

TEST(VehicleCounter, SumEqualsDistinctIds) {
  VehicleCounter c;
  std::mt19937_64 rng(1);
  const char* cats[] = {"car", "truck", "bus"};
  for (int i = 0; i < 100; ++i) c.record(i % 10, cats[rng() % 3]);
  std::size_t sum = 0;
  for (const auto& [k, v] : c.counts()) sum += v;
  EXPECT_EQ(sum, 10u);
  EXPECT_EQ(c.total(), 10u);
}

TEST(VehicleCounter, PermutationInvariantWhenUnanimous) {
  std::vector<std::pair<int, std::string>> events;
  for (int id = 0; id < 20; ++id) {
    for (int k = 0; k < 1 + id % 4; ++k) events.emplace_back(id, id % 3 == 0 ? "bus" : "car");
  }
  VehicleCounter ref;
  for (const auto& [id, cat] : events) ref.record(id, cat);
  std::mt19937_64 rng(9);
  for (int t = 0; t < 50; ++t) {
    std::shuffle(events.begin(), events.end(), rng);
    VehicleCounter c;
    for (const auto& [id, cat] : events) c.record(id, cat);
    EXPECT_EQ(c.counts(), ref.counts());
  }
}

TEST(VehicleCounter, ReleaseReturnsCategory) {
  VehicleCounter c;
  c.record(3, "bus");
  EXPECT_EQ(c.release(3), "bus");
  EXPECT_EQ(c.counts()["bus"], 0u);
  EXPECT_FALSE(c.release(3).has_value());
}

TEST(Normalize, Examples) {
  EXPECT_EQ(normalize("ab12 cde").text(), "AB12CDE");
  EXPECT_EQ(normalize("AB12-CD").text(), "AB12CD");
  try {
    normalize("AB1");
    FAIL();
  } catch (const RejectedRead& e) {
    EXPECT_EQ(e.reason(), RejectReason::TooShort);
  }
}

TEST(Normalize, RejectionReasons) {
  auto reason = [](std::string_view raw) { return std::get<RejectReason>(try_normalize(raw)); };
  EXPECT_EQ(reason("ABC12"), RejectReason::TooShort);
  EXPECT_EQ(reason("ABCDE12345"), RejectReason::TooLong);
  EXPECT_EQ(reason("AB12CDÉ"), RejectReason::BadChars);
  EXPECT_EQ(reason(""), RejectReason::TooShort);
  EXPECT_TRUE(std::holds_alternative<NormalizedPlate>(try_normalize(" a.b.1.2.c.d.e ")));
  EXPECT_TRUE(std::holds_alternative<NormalizedPlate>(try_normalize("AB12CDEF")));
}

TEST(FormatScore, Examples) {
  EXPECT_EQ(format_score(normalize("AB12CDE")), 2);
  EXPECT_EQ(format_score(normalize("1234567")), 1);
  EXPECT_EQ(format_score(normalize("AB12CD")), 0);
}

TEST(Consensus, PrefersStandardFormat) {
  std::vector<PlateCandidate> reads = {{"AB12CDE", 0.9}, {"AB12CDE", 0.9}, {"AB12CDE", 0.9}, {"AB12CD", 0.8}};
  const auto c = consensus(reads);
  EXPECT_EQ(c.status, ConsensusStatus::Confirmed);
  EXPECT_EQ(c.plate->text(), "AB12CDE");
  EXPECT_EQ(c.support, 3u);
  EXPECT_NEAR(c.score, 2.7, 1e-12);
}

TEST(Consensus, EmptyAndRejected) {
  EXPECT_EQ(consensus({}).status, ConsensusStatus::NoPlate);
  std::vector<PlateCandidate> reads = {{"XY", 0.99}};
  const auto c = consensus(reads);
  EXPECT_EQ(c.status, ConsensusStatus::NoPlate);
  EXPECT_FALSE(c.plate.has_value());
}

TEST(Consensus, SingleReadIsLowSupport) {
  std::vector<PlateCandidate> reads = {{"AB12CDE", 0.95}};
  const auto c = consensus(reads);
  EXPECT_EQ(c.status, ConsensusStatus::LowSupport);
  EXPECT_EQ(c.support, 1u);
}

TEST(Consensus, TieBreaksOnText) {
  std::vector<PlateCandidate> reads = {{"ZZ12CDE", 0.5}, {"AA12CDE", 0.5}, {"ZZ12CDE", 0.5}, {"AA12CDE", 0.5}};
  EXPECT_EQ(consensus(reads).plate->text(), "AA12CDE");
}

TEST(Consensus, MonotoneInWinningReads) {
  std::mt19937_64 rng(6);
  const std::vector<std::string> pool = {"AB12CDE", "AB12CDF", "A812CDE", "AB12CD", "1234567", "XY"};
  std::uniform_real_distribution<double> conf(0, 1);
  for (int t = 0; t < 200; ++t) {
    std::vector<PlateCandidate> reads;
    for (int i = 0; i < 6; ++i) reads.push_back({pool[rng() % pool.size()], conf(rng)});
    const auto c = consensus(reads);
    if (!c.plate) continue;
    reads.push_back({c.plate->text(), conf(rng)});
    EXPECT_EQ(consensus(reads).plate->text(), c.plate->text());
  }
}

TEST(Consensus, PermutationInvariant) {
  std::mt19937_64 rng(10);
  std::vector<PlateCandidate> reads = {{"AB12CDE", 0.31}, {"AB12CDE", 0.72}, {"AB12CDF", 0.55}, {"AB12CDF", 0.48},
                                       {"ab12 cdf", 0.1},  {"AB1", 0.99},    {"1234567", 0.9},  {"AB12CDE", 0.1}};
  const auto ref = consensus(reads);
  for (int i = 0; i < 1000; ++i) {
    std::shuffle(reads.begin(), reads.end(), rng);
    const auto c = consensus(reads);
    EXPECT_EQ(c.plate, ref.plate);
    EXPECT_EQ(c.score, ref.score);
    EXPECT_EQ(c.support, ref.support);
    EXPECT_EQ(c.status, ref.status);
  }
}
