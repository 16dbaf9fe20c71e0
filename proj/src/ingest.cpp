#include "co2stream/ingest.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>

namespace co2stream {

using nlohmann::json;

namespace {

std::string describe(IngestError::Kind kind, std::size_t line, const std::string& field, const std::string& detail) {
  std::string out = kind == IngestError::Kind::MalformedRecord ? "malformed record" : "schema violation";
  out += " at line " + std::to_string(line);
  if (!field.empty()) out += ", field " + field;
  out += ": " + detail;
  return out;
}

class RecordDecoder {
 public:
  explicit RecordDecoder(std::size_t line) : line_(line) {}

  [[noreturn]] void fail(const std::string& field, const std::string& detail) const {
    throw IngestError(IngestError::Kind::SchemaViolation, line_, field, detail);
  }

  const json& require(const json& obj, const char* key, const std::string& path) const {
    auto it = obj.find(key);
    if (it == obj.end()) fail(path + key, "missing required field");
    return *it;
  }

  std::uint64_t non_negative_int(const json& v, const std::string& path) const {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) fail(path, "must be non-negative");
    fail(path, "expected integer");
  }

  double finite_number(const json& v, const std::string& path) const {
    if (!v.is_number()) fail(path, "expected number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(path, "must be finite");
    return d;
  }

  double unit_interval(const json& v, const std::string& path) const {
    const double d = finite_number(v, path);
    if (d < 0.0 || d > 1.0) fail(path, "must lie in [0,1]");
    return d;
  }

  BoundingBox box(const json& v, const std::string& path) const {
    if (!v.is_array() || v.size() != 4) fail(path, "expected [x,y,w,h]");
    BoundingBox b{finite_number(v[0], path + ".x"), finite_number(v[1], path + ".y"),
                  finite_number(v[2], path + ".w"), finite_number(v[3], path + ".h")};
    if (b.x < 0.0) fail(path + ".x", "must be >= 0");
    if (b.y < 0.0) fail(path + ".y", "must be >= 0");
    if (b.w <= 0.0) fail(path + ".w", "must be > 0");
    if (b.h <= 0.0) fail(path + ".h", "must be > 0");
    return b;
  }

  PolygonMask mask(const json& v, const std::string& path) const {
    if (!v.is_array()) fail(path, "expected flat coordinate array");
    if (v.size() % 2 != 0) fail(path, "odd number of coordinates");
    if (v.size() < 6) fail(path, "polygon needs at least 3 vertices");
    PolygonMask m;
    m.vertices.reserve(v.size() / 2);
    for (std::size_t i = 0; i < v.size(); i += 2) {
      m.vertices.emplace_back(finite_number(v[i], path + "[" + std::to_string(i) + "]"),
                              finite_number(v[i + 1], path + "[" + std::to_string(i + 1) + "]"));
    }
    if (!geometry::is_simple<double>(m.vertices)) fail(path, "polygon is self-intersecting");
    return m;
  }

  Detection detection(const json& v, const std::string& path, bool require_confidence) const {
    if (!v.is_object()) fail(path, "expected object");
    Detection d;
    d.box = box(require(v, "box", path + "."), path + ".box");
    const json& label = require(v, "label", path + ".");
    if (!label.is_string()) fail(path + ".label", "expected string");
    d.label = label.get<std::string>();
    if (d.label.empty()) fail(path + ".label", "must be non-empty");
    if (require_confidence || v.contains("conf")) {
      d.confidence = unit_interval(require(v, "conf", path + "."), path + ".conf");
    } else {
      d.confidence = 1.0;
    }
    if (auto it = v.find("mask"); it != v.end() && !it->is_null()) d.mask = mask(*it, path + ".mask");
    if (auto it = v.find("plates"); it != v.end() && !it->is_null()) {
      if (!it->is_array()) fail(path + ".plates", "expected array");
      for (std::size_t i = 0; i < it->size(); ++i) {
        const std::string pp = path + ".plates[" + std::to_string(i) + "]";
        const json& p = (*it)[i];
        if (!p.is_object()) fail(pp, "expected object");
        const json& text = require(p, "text", pp + ".");
        if (!text.is_string()) fail(pp + ".text", "expected string");
        d.plate_candidates.push_back({text.get<std::string>(), unit_interval(require(p, "conf", pp + "."), pp + ".conf")});
      }
    }
    return d;
  }

  std::vector<Detection> detections(const json& obj, bool require_confidence) const {
    const json& dets = require(obj, "dets", "");
    if (!dets.is_array()) fail("dets", "expected array");
    std::vector<Detection> out;
    out.reserve(dets.size());
    for (std::size_t i = 0; i < dets.size(); ++i) {
      out.push_back(detection(dets[i], "dets[" + std::to_string(i) + "]", require_confidence));
    }
    return out;
  }

 private:
  std::size_t line_;
};

json parse_object(std::string_view line, std::size_t line_number) {
  json obj = json::parse(line.begin(), line.end(), nullptr, /*allow_exceptions=*/false);
  if (obj.is_discarded()) {
    throw IngestError(IngestError::Kind::MalformedRecord, line_number, "", "invalid JSON");
  }
  if (!obj.is_object()) {
    throw IngestError(IngestError::Kind::MalformedRecord, line_number, "", "record must be a JSON object");
  }
  return obj;
}

json detection_to_json(const Detection& d) {
  json j;
  j["box"] = {d.box.x, d.box.y, d.box.w, d.box.h};
  j["label"] = d.label;
  j["conf"] = d.confidence;
  if (d.mask) {
    json flat = json::array();
    for (const auto& v : d.mask->vertices) {
      flat.push_back(v.x());
      flat.push_back(v.y());
    }
    j["mask"] = std::move(flat);
  }
  if (!d.plate_candidates.empty()) {
    json plates = json::array();
    for (const auto& p : d.plate_candidates) plates.push_back({{"text", p.text}, {"conf", p.confidence}});
    j["plates"] = std::move(plates);
  }
  return j;
}

bool is_blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

}  // namespace

IngestError::IngestError(Kind kind, std::size_t line, std::string field, const std::string& detail)
    : std::runtime_error(describe(kind, line, field, detail)), kind_(kind), line_(line), field_(std::move(field)) {}

FrameRecord parse_frame_line(std::string_view line, std::size_t line_number) {
  const json obj = parse_object(line, line_number);
  RecordDecoder dec(line_number);
  FrameRecord rec;
  rec.frame_index = dec.non_negative_int(dec.require(obj, "frame", ""), "frame");
  rec.timestamp_ms = dec.non_negative_int(dec.require(obj, "ts_ms", ""), "ts_ms");
  rec.detections = dec.detections(obj, true);
  return rec;
}

std::string serialize_frame(const FrameRecord& record) {
  json j;
  j["frame"] = record.frame_index;
  j["ts_ms"] = record.timestamp_ms;
  json dets = json::array();
  for (const auto& d : record.detections) dets.push_back(detection_to_json(d));
  j["dets"] = std::move(dets);
  return j.dump();
}

void StreamValidator::push(const FrameRecord& record) {
  const std::size_t index = summary_.frames;
  if (!summary_.violation && last_) {
    if (record.frame_index <= last_->frame_index) {
      summary_.violation = OrderingViolation{index, "frame index " + std::to_string(record.frame_index) +
                                                        " does not increase past " +
                                                        std::to_string(last_->frame_index)};
    } else if (record.timestamp_ms < last_->timestamp_ms) {
      summary_.violation = OrderingViolation{index, "timestamp " + std::to_string(record.timestamp_ms) +
                                                        " ms precedes " + std::to_string(last_->timestamp_ms) +
                                                        " ms"};
    }
  }
  summary_.frames += 1;
  summary_.detections += record.detections.size();
  last_ = FrameRecord{record.frame_index, record.timestamp_ms, {}};
}

StreamSummary validate_stream(std::span<const FrameRecord> records) {
  StreamValidator v;
  for (const auto& r : records) v.push(r);
  return v.summary();
}

std::optional<FrameRecord> FrameReader::next() {
  while (std::getline(in_, buffer_)) {
    ++line_;
    if (is_blank(buffer_)) continue;
    return parse_frame_line(buffer_, line_);
  }
  return std::nullopt;
}

ImageRecord parse_image_line(std::string_view line, std::size_t line_number, bool require_confidence) {
  const json obj = parse_object(line, line_number);
  RecordDecoder dec(line_number);
  ImageRecord rec;
  const json& id = dec.require(obj, "image_id", "");
  if (id.is_string()) {
    rec.image_id = id.get<std::string>();
  } else if (id.is_number_integer()) {
    rec.image_id = id.dump();
  } else {
    dec.fail("image_id", "expected string or integer");
  }
  if (auto it = obj.find("width"); it != obj.end()) rec.width = dec.finite_number(*it, "width");
  if (auto it = obj.find("height"); it != obj.end()) rec.height = dec.finite_number(*it, "height");
  if (rec.width && *rec.width <= 0.0) dec.fail("width", "must be > 0");
  if (rec.height && *rec.height <= 0.0) dec.fail("height", "must be > 0");
  rec.detections = dec.detections(obj, require_confidence);
  return rec;
}

std::vector<ImageRecord> read_image_records(std::istream& in, bool require_confidence) {
  std::vector<ImageRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (is_blank(line)) continue;
    out.push_back(parse_image_line(line, n, require_confidence));
  }
  return out;
}

}  // namespace co2stream
