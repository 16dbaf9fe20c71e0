#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include "co2stream/ingest.hpp"

namespace co2stream {

enum class RejectReason { TooShort, TooLong, BadChars };

const char* to_string(RejectReason r);

class RejectedRead : public std::runtime_error {
 public:
  explicit RejectedRead(RejectReason reason);
  RejectReason reason() const { return reason_; }

 private:
  RejectReason reason_;
};

/// Plate validity and election rules.
///
/// `preferred_pattern` uses L for a letter and D for a digit; the default is the
/// current UK format. A plate matching it scores 2, any other plate of the same
/// length scores 1, everything else 0.
struct PlateRules {
  std::size_t min_length = 6;
  std::size_t max_length = 8;
  std::size_t min_support = 2;
  std::string preferred_pattern = "LLDDLLL";
};

/// Uppercase [A-Z0-9] text within the configured length bounds.
class NormalizedPlate {
 public:
  const std::string& text() const { return text_; }
  bool operator==(const NormalizedPlate&) const = default;
  auto operator<=>(const NormalizedPlate&) const = default;

 private:
  friend std::variant<NormalizedPlate, RejectReason> try_normalize(std::string_view, const PlateRules&);
  explicit NormalizedPlate(std::string text) : text_(std::move(text)) {}
  std::string text_;
};

std::variant<NormalizedPlate, RejectReason> try_normalize(std::string_view raw, const PlateRules& rules = {});

/// Throws RejectedRead.
NormalizedPlate normalize(std::string_view raw, const PlateRules& rules = {});

int format_score(const NormalizedPlate& plate, const PlateRules& rules = {});

enum class ConsensusStatus { Confirmed, LowSupport, NoPlate };

const char* to_string(ConsensusStatus s);

struct PlateConsensus {
  std::optional<NormalizedPlate> plate;
  double score = 0.0;
  std::size_t support = 0;
  ConsensusStatus status = ConsensusStatus::NoPlate;
};

PlateConsensus consensus(std::span<const PlateCandidate> reads, const PlateRules& rules = {});

}  // namespace co2stream
