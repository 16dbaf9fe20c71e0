#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "co2stream/ingest.hpp"

using namespace co2stream;

TEST(ParseFrameLine, EmptyFrame) {
  const auto r = parse_frame_line(R"({"frame":0,"ts_ms":0,"dets":[]})");
  EXPECT_EQ(r, (FrameRecord{0, 0, {}}));
}

TEST(ParseFrameLine, SingleDetection) {
  const auto r = parse_frame_line(R"({"frame":3,"ts_ms":120,"dets":[{"box":[10,20,50,40],"label":"suv","conf":0.9}]})");
  ASSERT_EQ(r.detections.size(), 1u);
  EXPECT_EQ(r.frame_index, 3u);
  EXPECT_EQ(r.timestamp_ms, 120u);
  const auto& d = r.detections[0];
  EXPECT_EQ(d.box, (BoundingBox{10, 20, 50, 40}));
  EXPECT_FALSE(d.mask.has_value());
  EXPECT_TRUE(d.plate_candidates.empty());
  EXPECT_EQ(d.label, "suv");
  EXPECT_DOUBLE_EQ(d.confidence, 0.9);
}

TEST(ParseFrameLine, NegativeWidthNamesField) {
  try {
    parse_frame_line(R"({"frame":1,"ts_ms":40,"dets":[{"box":[0,0,-5,10],"label":"car","conf":0.5}]})", 17);
    FAIL() << "expected SchemaViolation";
  } catch (const IngestError& e) {
    EXPECT_EQ(e.kind(), IngestError::Kind::SchemaViolation);
    EXPECT_EQ(e.field(), "dets[0].box.w");
    EXPECT_EQ(e.line(), 17u);
  }
}

TEST(ParseFrameLine, MaskAndPlates) {
  const auto r = parse_frame_line(
      R"({"frame":2,"ts_ms":80,"dets":[{"box":[1,1,10,10],"label":"car","conf":0.7,)"
      R"("mask":[1,1,11,1,11,11,1,11],"plates":[{"text":"ab12 cde","conf":0.8}]}],"extra":"ignored"})");
  const auto& d = r.detections.at(0);
  ASSERT_TRUE(d.mask.has_value());
  EXPECT_EQ(d.mask->vertices.size(), 4u);
  ASSERT_EQ(d.plate_candidates.size(), 1u);
  EXPECT_EQ(d.plate_candidates[0].text, "ab12 cde");
}

TEST(ParseFrameLine, SchemaViolations) {
  struct Case {
    const char* line;
    const char* field;
  };
  const Case cases[] = {
      {R"({"ts_ms":0,"dets":[]})", "frame"},
      {R"({"frame":-1,"ts_ms":0,"dets":[]})", "frame"},
      {R"({"frame":0,"ts_ms":0,"dets":{}})", "dets"},
      {R"({"frame":0,"ts_ms":0,"dets":[{"box":[0,0,1,1],"label":"","conf":0.5}]})", "dets[0].label"},
      {R"({"frame":0,"ts_ms":0,"dets":[{"box":[0,0,1,1],"label":"car","conf":1.5}]})", "dets[0].conf"},
      {R"({"frame":0,"ts_ms":0,"dets":[{"box":[0,0,1],"label":"car","conf":0.5}]})", "dets[0].box"},
      {R"({"frame":0,"ts_ms":0,"dets":[{"box":[0,0,1,1],"label":"car","conf":0.5,"mask":[0,0,1,1]}]})",
       "dets[0].mask"},
      {R"({"frame":0,"ts_ms":0,"dets":[{"box":[0,0,1,1],"label":"car","conf":0.5,"mask":[0,0,1,1,1,0,0,1]}]})",
       "dets[0].mask"},
  };
  for (const auto& c : cases) {
    try {
      parse_frame_line(c.line);
      ADD_FAILURE() << "accepted " << c.line;
    } catch (const IngestError& e) {
      EXPECT_EQ(e.kind(), IngestError::Kind::SchemaViolation) << c.line;
      EXPECT_EQ(e.field(), c.field) << c.line;
    }
  }
}

TEST(ParseFrameLine, MalformedSyntax) {
  for (const char* line : {"", "{", "[1,2]", "null", R"({"frame":0,)", "not json"}) {
    try {
      parse_frame_line(line);
      ADD_FAILURE() << "accepted " << line;
    } catch (const IngestError& e) {
      EXPECT_EQ(e.kind(), IngestError::Kind::MalformedRecord) << line;
    }
  }
}

TEST(ParseFrameLine, RoundTrip) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pos(0, 1000), size(0.5, 200), unit(0, 1);
  for (int n = 0; n < 300; ++n) {
    FrameRecord f;
    f.frame_index = rng() % 100000;
    f.timestamp_ms = rng() % 10000000;
    const int dets = static_cast<int>(rng() % 5);
    for (int i = 0; i < dets; ++i) {
      Detection d;
      d.box = {pos(rng), pos(rng), size(rng), size(rng)};
      d.label = "label" + std::to_string(rng() % 7);
      d.confidence = unit(rng);
      if (rng() % 2) {
        PolygonMask m;
        m.vertices = {{d.box.x, d.box.y}, {d.box.right(), d.box.y}, {d.box.x, d.box.bottom()}};
        d.mask = m;
      }
      for (int k = 0; k < static_cast<int>(rng() % 3); ++k) d.plate_candidates.push_back({"AB12CDE", unit(rng)});
      f.detections.push_back(d);
    }
    const std::string line = serialize_frame(f);
    const FrameRecord back = parse_frame_line(line);
    EXPECT_EQ(back, f);
    EXPECT_EQ(serialize_frame(back), line);
  }
}

TEST(ParseFrameLine, FuzzNeverCrashes) {
  const std::string seed = R"({"frame":3,"ts_ms":120,"dets":[{"box":[10,20,50,40],"label":"suv","conf":0.9,)"
                           R"("mask":[10,20,60,20,60,60],"plates":[{"text":"AB12CDE","conf":0.8}]}]})";
  std::mt19937_64 rng(2024);
  int accepted = 0;
  for (int i = 0; i < 20000; ++i) {
    std::string s = seed;
    const int edits = 1 + static_cast<int>(rng() % 6);
    for (int e = 0; e < edits; ++e) {
      const std::size_t pos = rng() % (s.size() + 1);
      switch (rng() % 4) {
        case 0: if (pos < s.size()) s[pos] = static_cast<char>(rng() % 256); break;
        case 1: s.insert(pos, 1, static_cast<char>(rng() % 256)); break;
        case 2: if (pos < s.size()) s.erase(pos, 1 + rng() % 8); break;
        default: s = s.substr(0, pos); break;
      }
    }
    try {
      parse_frame_line(s);
      ++accepted;
    } catch (const IngestError&) {
    }
  }
  // Some single-byte edits leave a valid record; most do not.
  EXPECT_LT(accepted, 20000);
}

TEST(ValidateStream, Clean) {
  std::vector<FrameRecord> s = {{0, 0, {}}, {1, 40, {}}, {2, 80, {}}};
  const auto sum = validate_stream(s);
  EXPECT_TRUE(sum.clean());
  EXPECT_EQ(sum.frames, 3u);
}

TEST(ValidateStream, FrameRegression) {
  std::vector<FrameRecord> s = {{0, 0, {}}, {2, 40, {}}, {1, 80, {}}};
  const auto sum = validate_stream(s);
  ASSERT_FALSE(sum.clean());
  EXPECT_EQ(sum.violation->record_index, 2u);
}

TEST(ValidateStream, TimestampRegression) {
  std::vector<FrameRecord> s = {{0, 100, {}}, {1, 50, {}}};
  const auto sum = validate_stream(s);
  ASSERT_FALSE(sum.clean());
  EXPECT_EQ(sum.violation->record_index, 1u);
}

TEST(FrameReader, SkipsBlankLinesAndReportsLineNumbers) {
  std::istringstream in("{\"frame\":0,\"ts_ms\":0,\"dets\":[]}\n\n{\"frame\":1,\"ts_ms\":40,\"dets\":[]}\n{oops\n");
  FrameReader reader(in);
  EXPECT_TRUE(reader.next());
  EXPECT_TRUE(reader.next());
  try {
    reader.next();
    FAIL();
  } catch (const IngestError& e) {
    EXPECT_EQ(e.line(), 4u);
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos);
  }
}

TEST(ImageRecords, GroundTruthConfidenceDefaultsToOne) {
  const auto r = parse_image_line(R"({"image_id":"a","width":640,"height":480,"dets":[{"box":[1,1,5,5],"label":"car"}]})",
                                  1, false);
  EXPECT_EQ(r.image_id, "a");
  EXPECT_DOUBLE_EQ(r.detections.at(0).confidence, 1.0);
  EXPECT_THROW(parse_image_line(R"({"image_id":"a","dets":[{"box":[1,1,5,5],"label":"car"}]})", 1, true),
               IngestError);
}
