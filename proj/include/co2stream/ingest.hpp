#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "co2stream/geometry.hpp"

namespace co2stream {

struct PlateCandidate {
  std::string text;
  double confidence = 0.0;

  bool operator==(const PlateCandidate&) const = default;
};

struct Detection {
  BoundingBox box;
  std::optional<PolygonMask> mask;
  std::string label;
  double confidence = 0.0;
  std::vector<PlateCandidate> plate_candidates;

  bool operator==(const Detection&) const = default;
};

struct FrameRecord {
  std::uint64_t frame_index = 0;
  std::uint64_t timestamp_ms = 0;
  std::vector<Detection> detections;

  bool operator==(const FrameRecord&) const = default;
};

/// Raised for records that cannot be decoded. `kind` separates bad syntax from
/// well-formed JSON that breaks the record schema.
class IngestError : public std::runtime_error {
 public:
  enum class Kind { MalformedRecord, SchemaViolation };

  IngestError(Kind kind, std::size_t line, std::string field, const std::string& detail);

  Kind kind() const { return kind_; }
  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  Kind kind_;
  std::size_t line_;
  std::string field_;
};

FrameRecord parse_frame_line(std::string_view line, std::size_t line_number = 1);
std::string serialize_frame(const FrameRecord& record);

struct OrderingViolation {
  std::size_t record_index = 0;
  std::string reason;
};

struct StreamSummary {
  std::size_t frames = 0;
  std::size_t detections = 0;
  std::optional<OrderingViolation> violation;

  bool clean() const { return !violation.has_value(); }
};

StreamSummary validate_stream(std::span<const FrameRecord> records);

/// Incremental form of validate_stream for unbounded inputs.
class StreamValidator {
 public:
  void push(const FrameRecord& record);
  const StreamSummary& summary() const { return summary_; }

 private:
  StreamSummary summary_;
  std::optional<FrameRecord> last_;
};

/// Pulls FrameRecords out of a JSONL stream one line at a time; blank lines are skipped.
class FrameReader {
 public:
  explicit FrameReader(std::istream& in) : in_(in) {}

  std::optional<FrameRecord> next();
  std::size_t line_number() const { return line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
  std::string buffer_;
};

/// Evaluation dialect: same detection encoding, keyed by `image_id` instead of `frame`.
struct ImageRecord {
  std::string image_id;
  std::optional<double> width;
  std::optional<double> height;
  std::vector<Detection> detections;
};

/// `require_confidence` is false for ground-truth files, where `conf` defaults to 1.
ImageRecord parse_image_line(std::string_view line, std::size_t line_number, bool require_confidence);
std::vector<ImageRecord> read_image_records(std::istream& in, bool require_confidence);

}  // namespace co2stream
