#include "co2stream/plate.hpp"

#include <algorithm>
#include <map>
#include <tuple>
#include <vector>

namespace co2stream {

namespace {

bool is_ascii_alnum(unsigned char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
}

bool is_strippable(unsigned char c) {
  // ASCII whitespace and ASCII punctuation.
  return c == ' ' || (c >= '\t' && c <= '\r') || (c >= 0x21 && c <= 0x7e && !is_ascii_alnum(c));
}

}  // namespace

const char* to_string(RejectReason r) {
  switch (r) {
    case RejectReason::TooShort: return "TooShort";
    case RejectReason::TooLong: return "TooLong";
    case RejectReason::BadChars: return "BadChars";
  }
  return "Unknown";
}

const char* to_string(ConsensusStatus s) {
  switch (s) {
    case ConsensusStatus::Confirmed: return "Confirmed";
    case ConsensusStatus::LowSupport: return "LowSupport";
    case ConsensusStatus::NoPlate: return "NoPlate";
  }
  return "Unknown";
}

RejectedRead::RejectedRead(RejectReason reason)
    : std::runtime_error(std::string("plate read rejected: ") + to_string(reason)), reason_(reason) {}

std::variant<NormalizedPlate, RejectReason> try_normalize(std::string_view raw, const PlateRules& rules) {
  std::string text;
  text.reserve(raw.size());
  for (unsigned char c : raw) {
    if (is_strippable(c)) continue;
    if (!is_ascii_alnum(c)) return RejectReason::BadChars;
    text.push_back(static_cast<char>(c >= 'a' && c <= 'z' ? c - 'a' + 'A' : c));
  }
  if (text.size() < rules.min_length) return RejectReason::TooShort;
  if (text.size() > rules.max_length) return RejectReason::TooLong;
  return NormalizedPlate(std::move(text));
}

NormalizedPlate normalize(std::string_view raw, const PlateRules& rules) {
  auto r = try_normalize(raw, rules);
  if (auto* reason = std::get_if<RejectReason>(&r)) throw RejectedRead(*reason);
  return std::get<NormalizedPlate>(std::move(r));
}

int format_score(const NormalizedPlate& plate, const PlateRules& rules) {
  const std::string& t = plate.text();
  const std::string& pattern = rules.preferred_pattern;
  if (t.size() != pattern.size()) return 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const bool letter = t[i] >= 'A' && t[i] <= 'Z';
    if ((pattern[i] == 'L') != letter) return 1;
  }
  return 2;
}

PlateConsensus consensus(std::span<const PlateCandidate> reads, const PlateRules& rules) {
  std::map<std::string, std::vector<double>> groups;
  for (const auto& r : reads) {
    auto n = try_normalize(r.text, rules);
    if (auto* p = std::get_if<NormalizedPlate>(&n)) groups[p->text()].push_back(r.confidence);
  }
  if (groups.empty()) return {};

  PlateConsensus best;
  std::tuple<int, double, std::size_t> best_key{-1, 0.0, 0};
  // Map iteration is lexicographic, so strict improvement keeps the smallest text on ties.
  for (auto& [text, confs] : groups) {
    // Sorted summation makes the score independent of read order.
    std::sort(confs.begin(), confs.end());
    double sum = 0.0;
    for (double c : confs) sum += c;
    NormalizedPlate plate = normalize(text, rules);
    const std::tuple<int, double, std::size_t> key{format_score(plate, rules), sum, confs.size()};
    if (key > best_key) {
      best_key = key;
      best.plate = std::move(plate);
      best.score = sum;
      best.support = confs.size();
    }
  }
  best.status = best.support >= rules.min_support ? ConsensusStatus::Confirmed : ConsensusStatus::LowSupport;
  return best;
}

}  // namespace co2stream
