#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace co2stream {

class UnknownLabel : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raw detector label (lowercased) to canonical category.
class CategoryMap {
 public:
  /// Ships the common raw labels plus the traffic dataset classes.
  static CategoryMap defaults();

  void set(std::string_view raw, std::string canonical);
  const std::map<std::string, std::string>& entries() const { return entries_; }

  /// Strict maps reject unmapped labels; otherwise they go to the fallback, or
  /// pass through lowercased when no fallback is configured.
  bool strict = false;
  std::optional<std::string> fallback;

  /// Distinct canonical categories reachable through the map.
  std::vector<std::string> categories() const;

 private:
  std::map<std::string, std::string> entries_;
};

std::string lowercase(std::string_view s);

std::string map_label(std::string_view raw, const CategoryMap& map);

/// Duplicate-free vehicle counts per category, keyed by track id.
///
/// Each record() is a category vote for the track; the track is counted under
/// its majority category, ties going to the most recently recorded category.
class VehicleCounter {
 public:
  VehicleCounter() = default;
  explicit VehicleCounter(const std::vector<std::string>& categories);

  void record(std::uint64_t track_id, const std::string& category);

  std::map<std::string, std::size_t> counts() const;
  std::size_t total() const { return tracks_.size(); }
  std::optional<std::string> category_of(std::uint64_t track_id) const;

  /// Stops tracking `track_id`, returning the category it was counted under.
  std::optional<std::string> release(std::uint64_t track_id);

 private:
  struct Vote {
    std::size_t count = 0;
    std::uint64_t last_seq = 0;
  };
  struct Entry {
    std::map<std::string, Vote> votes;
    std::string current;
  };

  std::map<std::string, std::size_t> counts_;
  std::unordered_map<std::uint64_t, Entry> tracks_;
  std::uint64_t seq_ = 0;
};

}  // namespace co2stream
