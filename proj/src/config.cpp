#include "co2stream/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace co2stream {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string strip_comment(std::string_view line) {
  const auto pos = line.find('#');
  return trim(pos == std::string_view::npos ? line : line.substr(0, pos));
}

void reject_unknown(const KeyValueConfig& kv, const std::string& section, const std::set<std::string>& known) {
  for (const auto& [key, value] : kv.section(section)) {
    if (!known.count(key)) throw ConfigError("unknown config key '" + section + "." + key + "'");
  }
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
  KeyValueConfig cfg;
  std::string prefix;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string line = strip_comment(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config line " + std::to_string(line_no) + ": unterminated section");
      prefix = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    cfg.entries_[prefix.empty() ? key : prefix + "." + key] = trim(std::string_view(line).substr(eq + 1));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size()) throw ConfigError("config key '" + key + "' is not a number");
  return out;
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  long long out = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size()) {
    throw ConfigError("config key '" + key + "' is not an integer");
  }
  return out;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  const std::string s = lowercase(*v);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("config key '" + key + "' is not a boolean");
}

std::map<std::string, std::string> KeyValueConfig::section(const std::string& prefix) const {
  std::map<std::string, std::string> out;
  const std::string p = prefix + ".";
  for (auto it = entries_.lower_bound(p); it != entries_.end() && it->first.starts_with(p); ++it) {
    out.emplace(it->first.substr(p.size()), it->second);
  }
  return out;
}

void PipelineConfig::validate() const {
  tracker.validate();
  registry.validate();
  emission.calibration.validate();
  if (plate.min_length == 0 || plate.min_length > plate.max_length) throw ConfigError("plate length bounds invalid");
  if (plate.min_support == 0) throw ConfigError("plate.min_support must be positive");
  if (window_s < 0.0) throw ConfigError("report.window_s must be >= 0");
  if (max_in_flight_lookups <= 0) throw ConfigError("registry.max_in_flight must be positive");
}

PipelineConfig pipeline_config_from(const KeyValueConfig& kv) {
  PipelineConfig cfg;

  reject_unknown(kv, "tracker",
                 {"det_conf_floor", "high_score_thresh", "match_iou_thresh", "low_match_iou_thresh",
                  "track_buffer_frames", "min_hits_to_activate", "std_weight_position", "std_weight_velocity"});
  auto& t = cfg.tracker;
  t.det_conf_floor = kv.get_double("tracker.det_conf_floor", t.det_conf_floor);
  t.high_score_thresh = kv.get_double("tracker.high_score_thresh", t.high_score_thresh);
  t.match_iou_thresh = kv.get_double("tracker.match_iou_thresh", t.match_iou_thresh);
  t.low_match_iou_thresh = kv.get_double("tracker.low_match_iou_thresh", t.low_match_iou_thresh);
  t.track_buffer_frames = static_cast<int>(kv.get_int("tracker.track_buffer_frames", t.track_buffer_frames));
  t.min_hits_to_activate = static_cast<int>(kv.get_int("tracker.min_hits_to_activate", t.min_hits_to_activate));
  t.std_weight_position = kv.get_double("tracker.std_weight_position", t.std_weight_position);
  t.std_weight_velocity = kv.get_double("tracker.std_weight_velocity", t.std_weight_velocity);

  reject_unknown(kv, "classmap_options", {"strict", "fallback", "replace_defaults"});
  if (kv.get_bool("classmap_options.replace_defaults", false)) cfg.classmap = CategoryMap{};
  cfg.classmap.strict = kv.get_bool("classmap_options.strict", false);
  if (auto fb = kv.get("classmap_options.fallback")) cfg.classmap.fallback = *fb;
  for (const auto& [raw, canonical] : kv.section("classmap")) cfg.classmap.set(raw, canonical);

  reject_unknown(kv, "plate", {"min_length", "max_length", "min_support", "preferred_pattern"});
  auto& p = cfg.plate;
  p.min_length = static_cast<std::size_t>(kv.get_int("plate.min_length", static_cast<long long>(p.min_length)));
  p.max_length = static_cast<std::size_t>(kv.get_int("plate.max_length", static_cast<long long>(p.max_length)));
  p.min_support = static_cast<std::size_t>(kv.get_int("plate.min_support", static_cast<long long>(p.min_support)));
  p.preferred_pattern = kv.get_string("plate.preferred_pattern", p.preferred_pattern);

  reject_unknown(kv, "registry",
                 {"base_url", "timeout_ms", "max_retries", "backoff_ms", "cache_capacity", "cache_ttl_s", "max_in_flight"});
  auto& r = cfg.registry;
  if (auto url = kv.get("registry.base_url")) {
    r.base_url = *url;
    cfg.registry_url = *url;
  }
  r.timeout_ms = static_cast<int>(kv.get_int("registry.timeout_ms", r.timeout_ms));
  r.max_retries = static_cast<int>(kv.get_int("registry.max_retries", r.max_retries));
  r.backoff_ms = static_cast<int>(kv.get_int("registry.backoff_ms", r.backoff_ms));
  r.cache_capacity = static_cast<std::size_t>(kv.get_int("registry.cache_capacity", static_cast<long long>(r.cache_capacity)));
  r.cache_ttl_s = static_cast<int>(kv.get_int("registry.cache_ttl_s", r.cache_ttl_s));
  cfg.max_in_flight_lookups = static_cast<int>(kv.get_int("registry.max_in_flight", cfg.max_in_flight_lookups));

  for (const auto& [key, value] : kv.section("emission")) {
    if (key.starts_with("factor.")) {
      const std::string rest = key.substr(7);
      const auto dot = rest.find('.');
      if (dot == std::string::npos) throw ConfigError("expected emission.factor.<class>.<fuel>, got '" + key + "'");
      cfg.emission.table.set(rest.substr(0, dot), rest.substr(dot + 1), kv.get_double("emission." + key, 0.0));
    } else if (key.starts_with("category_default.")) {
      cfg.emission.category_defaults.g_per_km[key.substr(17)] = kv.get_double("emission." + key, 0.0);
    } else if (key == "unknown_category_default") {
      cfg.emission.category_defaults.unknown_category = kv.get_double("emission." + key, 0.0);
    } else {
      throw ConfigError("unknown config key 'emission." + key + "'");
    }
  }

  reject_unknown(kv, "calibration", {"meters_per_pixel", "fallback_speed_kmh"});
  auto& cal = cfg.emission.calibration;
  cal.meters_per_pixel = kv.get_double("calibration.meters_per_pixel", cal.meters_per_pixel);
  cal.fallback_speed_kmh = kv.get_double("calibration.fallback_speed_kmh", cal.fallback_speed_kmh);

  reject_unknown(kv, "report", {"window_s"});
  cfg.window_s = kv.get_double("report.window_s", cfg.window_s);

  cfg.validate();
  return cfg;
}

}  // namespace co2stream
