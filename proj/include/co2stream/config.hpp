#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "co2stream/classmap.hpp"
#include "co2stream/emission.hpp"
#include "co2stream/plate.hpp"
#include "co2stream/registry.hpp"
#include "co2stream/tracker.hpp"

namespace co2stream {

/// Flat `key = value` settings with dotted section prefixes.
///
///   # comment
///   tracker.match_iou_thresh = 0.45
///   [classmap]            # subsequent keys are read as classmap.<key>
///   suv = car
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(const std::string& key, std::string value) { entries_[key] = std::move(value); }
  std::optional<std::string> get(const std::string& key) const;
  bool contains(const std::string& key) const { return entries_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// Entries under `prefix.`, with the prefix stripped.
  std::map<std::string, std::string> section(const std::string& prefix) const;
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

struct PipelineConfig {
  TrackerConfig tracker;
  CategoryMap classmap = CategoryMap::defaults();
  PlateRules plate;
  RegistryConfig registry;
  std::optional<std::string> registry_url;
  EmissionModel emission;
  double window_s = 0.0;
  int max_in_flight_lookups = 8;

  void validate() const;
};

/// Reads the tracker, classmap, plate, registry, emission, calibration and report
/// sections. Keys in other sections are ignored; unknown keys inside these throw.
PipelineConfig pipeline_config_from(const KeyValueConfig& kv);

}  // namespace co2stream
