#include "co2stream/scenario.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include <json.hpp>

#include "co2stream/classmap.hpp"
#include "co2stream/plate.hpp"

namespace co2stream::scenario {

namespace {

using json = nlohmann::json;

constexpr std::string_view kAlnum = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

struct CategoryShape {
  const char* name;
  double weight;
  double width;
  double height;
  std::vector<const char*> raw_labels;
  std::vector<std::pair<const char*, const char*>> makes;
};

const std::vector<CategoryShape>& shapes() {
  static const std::vector<CategoryShape> s = {
      {"car", 0.6, 160, 70, {"car", "suv", "taxi", "private-car"},
       {{"FORD", "FOCUS"}, {"VAUXHALL", "CORSA"}, {"TOYOTA", "PRIUS"}, {"BMW", "3 SERIES"}, {"TESLA", "MODEL 3"}}},
      {"truck", 0.2, 220, 90, {"truck", "pickup", "van"}, {{"FORD", "RANGER"}, {"TOYOTA", "HILUX"}, {"NISSAN", "NAVARA"}}},
      {"bus", 0.1, 260, 95, {"bus", "minibus"}, {{"ALEXANDER DENNIS", "ENVIRO400"}, {"WRIGHTBUS", "STREETDECK"}}},
      {"motorcycle", 0.1, 90, 50, {"motorcycle", "motorbike"}, {{"HONDA", "CB500"}, {"YAMAHA", "MT-07"}}},
  };
  return s;
}

const CategoryShape& shape_of(const std::string& category) {
  for (const auto& s : shapes()) {
    if (category == s.name) return s;
  }
  throw ConfigError("scenario category must be car, truck, bus or motorcycle, got '" + category + "'");
}

template <class T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  if (lo == hi) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::string random_plate(std::mt19937_64& rng) {
  std::string out;
  for (char c : std::string_view("LLDDLLL")) {
    out += c == 'L' ? kAlnum[std::uniform_int_distribution<int>(0, 25)(rng)]
                    : kAlnum[std::uniform_int_distribution<int>(26, 35)(rng)];
  }
  return out;
}

void check_unit(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string("scenario.") + name + " must be in [0,1]");
}

}  // namespace

void ScenarioConfig::validate() const {
  if (n_vehicles < 0) throw ConfigError("scenario.n_vehicles must be >= 0");
  if (!(frame_rate_hz > 0.0)) throw ConfigError("scenario.frame_rate_hz must be > 0");
  if (!(duration_s > 0.0)) throw ConfigError("scenario.duration_s must be > 0");
  if (image_width <= 0 || image_height <= 0) throw ConfigError("scenario image size must be positive");
  if (!(lane_height_px > 0.0) || lane_height_px > image_height) {
    throw ConfigError("scenario.lane_height_px must be in (0, image_height]");
  }
  if (!(meters_per_pixel > 0.0)) throw ConfigError("scenario.meters_per_pixel must be > 0");
  check_unit(dropout, "dropout");
  check_unit(ocr_corruption, "ocr_corruption");
  check_unit(plate_read_prob, "plate_read_prob");
  check_unit(numeric_co2_fraction, "numeric_co2_fraction");
  check_unit(conf_min, "conf_min");
  check_unit(conf_max, "conf_max");
  check_unit(plate_conf_min, "plate_conf_min");
  check_unit(plate_conf_max, "plate_conf_max");
  if (conf_min > conf_max || plate_conf_min > plate_conf_max) throw ConfigError("scenario confidence range inverted");
  if (!(box_jitter_px >= 0.0)) throw ConfigError("scenario.box_jitter_px must be >= 0");
  for (const auto& [i, o] : vehicles) {
    if (i < 0 || i >= n_vehicles) throw ConfigError("scenario.vehicle." + std::to_string(i) + " is out of range");
  }
}

std::uint64_t ScenarioConfig::frame_count() const {
  return static_cast<std::uint64_t>(std::ceil(duration_s * frame_rate_hz - 1e-9));
}

ScenarioConfig scenario_config_from(const KeyValueConfig& kv) {
  ScenarioConfig c;
  c.seed = static_cast<std::uint64_t>(kv.get_int("scenario.seed", static_cast<long long>(c.seed)));
  c.n_vehicles = static_cast<int>(kv.get_int("scenario.n_vehicles", c.n_vehicles));
  c.frame_rate_hz = kv.get_double("scenario.frame_rate_hz", c.frame_rate_hz);
  c.duration_s = kv.get_double("scenario.duration_s", c.duration_s);
  c.image_width = static_cast<int>(kv.get_int("scenario.image_width", c.image_width));
  c.image_height = static_cast<int>(kv.get_int("scenario.image_height", c.image_height));
  c.lane_height_px = kv.get_double("scenario.lane_height_px", c.lane_height_px);
  c.meters_per_pixel =
      kv.get_double("scenario.meters_per_pixel", kv.get_double("calibration.meters_per_pixel", c.meters_per_pixel));
  c.dropout = kv.get_double("scenario.dropout", c.dropout);
  c.box_jitter_px = kv.get_double("scenario.box_jitter_px", c.box_jitter_px);
  c.ocr_corruption = kv.get_double("scenario.ocr_corruption", c.ocr_corruption);
  c.plate_read_prob = kv.get_double("scenario.plate_read_prob", c.plate_read_prob);
  c.conf_min = kv.get_double("scenario.conf_min", c.conf_min);
  c.conf_max = kv.get_double("scenario.conf_max", c.conf_max);
  c.plate_conf_min = kv.get_double("scenario.plate_conf_min", c.plate_conf_min);
  c.plate_conf_max = kv.get_double("scenario.plate_conf_max", c.plate_conf_max);
  c.numeric_co2_fraction = kv.get_double("scenario.numeric_co2_fraction", c.numeric_co2_fraction);

  static const std::set<std::string> top = {
      "seed",         "n_vehicles", "frame_rate_hz",  "duration_s",      "image_width",    "image_height",
      "lane_height_px", "meters_per_pixel", "dropout", "box_jitter_px", "ocr_corruption", "plate_read_prob",
      "conf_min",     "conf_max",   "plate_conf_min", "plate_conf_max",  "numeric_co2_fraction"};
  for (const auto& [key, value] : kv.section("scenario")) {
    if (top.count(key)) continue;
    if (!key.starts_with("vehicle.")) throw ConfigError("unknown config key 'scenario." + key + "'");
    const std::string rest = key.substr(8);
    const auto dot = rest.find('.');
    if (dot == std::string::npos) throw ConfigError("expected scenario.vehicle.<i>.<field>, got '" + key + "'");
    int index = 0;
    try {
      index = std::stoi(rest.substr(0, dot));
    } catch (const std::exception&) {
      throw ConfigError("bad vehicle index in 'scenario." + key + "'");
    }
    const std::string field = rest.substr(dot + 1);
    const std::string full = "scenario." + key;
    auto& o = c.vehicles[index];
    if (field == "category") o.category = lowercase(value);
    else if (field == "raw_label") o.raw_label = value;
    else if (field == "vehicle_class") o.vehicle_class = value;
    else if (field == "fuel_type") o.fuel_type = value;
    else if (field == "plate") o.plate = value;
    else if (field == "co2_g_per_km") o.co2_g_per_km = kv.get_double(full, 0.0);
    else if (field == "entry_frame") o.entry_frame = static_cast<std::uint64_t>(kv.get_int(full, 0));
    else if (field == "exit_frame") o.exit_frame = static_cast<std::uint64_t>(kv.get_int(full, 0));
    else if (field == "speed_px_s") o.speed_px_s = kv.get_double(full, 0.0);
    else throw ConfigError("unknown config key '" + full + "'");
  }
  c.validate();
  return c;
}

double VehiclePlan::x_at(std::uint64_t frame, double rate_hz) const {
  return x0 + velocity_px_s * (static_cast<double>(frame - entry_frame) / rate_hz);
}

GroundTruth plan(const ScenarioConfig& cfg, const EmissionFactorTable& table) {
  cfg.validate();
  std::seed_seq seq{cfg.seed, std::uint64_t{0x6c61796f7574}};
  std::mt19937_64 rng(seq);

  const std::uint64_t frames = cfg.frame_count();
  const int n = cfg.n_vehicles;
  const int lanes = std::max(1, std::min(n, static_cast<int>(cfg.image_height / cfg.lane_height_px)));
  const CategoryDefaults category_defaults;

  std::vector<std::pair<std::string, std::string>> car_rows;
  std::vector<std::pair<std::string, std::string>> truck_rows;
  for (const auto& row : table.rows()) {
    (lowercase(row.vehicle_class) == "pickup" ? truck_rows : car_rows).emplace_back(row.vehicle_class, row.fuel_type);
  }

  std::vector<double> weights;
  for (const auto& s : shapes()) weights.push_back(s.weight);
  std::discrete_distribution<std::size_t> category_dist(weights.begin(), weights.end());

  GroundTruth gt;
  std::set<std::string> plates;
  for (const auto& [i, o] : cfg.vehicles) {
    if (o.plate) plates.insert(normalize(*o.plate).text());
  }

  for (int i = 0; i < n; ++i) {
    const VehicleOverride none;
    auto ov = cfg.vehicles.find(i);
    const VehicleOverride& o = ov == cfg.vehicles.end() ? none : ov->second;

    VehiclePlan v;
    v.index = i;
    const std::size_t drawn_cat = category_dist(rng);
    v.category = o.category.value_or(shapes()[drawn_cat].name);
    const CategoryShape& shape = shape_of(v.category);
    v.raw_label = o.raw_label.value_or(pick(shape.raw_labels, rng));
    const auto& mm = pick(shape.makes, rng);
    v.make = mm.first;
    v.model = mm.second;

    if (o.plate) {
      v.plate = normalize(*o.plate).text();
    } else {
      do {
        v.plate = random_plate(rng);
      } while (!plates.insert(v.plate).second);
    }

    const double numeric_roll = uniform(rng, 0.0, 1.0);
    if (v.category == "car" || v.category == "truck") {
      const auto& rows = v.category == "car" ? car_rows : truck_rows;
      const auto& row = rows.empty() ? std::pair<std::string, std::string>{"Midsize", "Gasoline"} : pick(rows, rng);
      v.vehicle_class = row.first;
      v.fuel_type = row.second;
      if (numeric_roll < cfg.numeric_co2_fraction) {
        const double base = table.find(v.vehicle_class, v.fuel_type).value_or(category_defaults.factor(v.category));
        v.co2_g_per_km = std::round(base * uniform(rng, 0.85, 1.15));
      }
    } else if (v.category == "bus") {
      v.vehicle_class = "Bus";
      v.fuel_type = "Diesel";
      v.co2_g_per_km = std::round(uniform(rng, 700.0, 1000.0));
    } else {
      v.vehicle_class = "Motorcycle";
      v.fuel_type = "Gasoline";
      v.co2_g_per_km = std::round(uniform(rng, 70.0, 120.0));
    }
    if (o.vehicle_class) v.vehicle_class = *o.vehicle_class;
    if (o.fuel_type) v.fuel_type = *o.fuel_type;
    if (o.co2_g_per_km) v.co2_g_per_km = *o.co2_g_per_km;
    if (lowercase(v.fuel_type) == "electric" && v.co2_g_per_km) v.co2_g_per_km = 0.0;

    v.width = shape.width * uniform(rng, 0.9, 1.1);
    v.height = shape.height * uniform(rng, 0.9, 1.1);
    if (v.width > cfg.image_width || v.height > cfg.lane_height_px) {
      throw ConfigError("scenario image or lane too small for vehicle " + std::to_string(i));
    }

    // Vehicles in a lane take turns: the lane's frames are split into equal slots.
    const int lane = i % lanes;
    const int slot = i / lanes;
    const int per_lane = (n - lane + lanes - 1) / lanes;
    const std::uint64_t begin = frames * static_cast<std::uint64_t>(slot) / static_cast<std::uint64_t>(per_lane);
    const std::uint64_t end = frames * static_cast<std::uint64_t>(slot + 1) / static_cast<std::uint64_t>(per_lane);
    const std::uint64_t gap = slot > 0 ? (end - begin) / 10 : 0;
    v.entry_frame = o.entry_frame.value_or(begin + gap);
    v.exit_frame = std::min(o.exit_frame.value_or(end), frames);
    if (v.exit_frame < v.entry_frame + 2) {
      throw ConfigError("vehicle " + std::to_string(i) + " would be visible for fewer than 2 frames");
    }

    const double travel = cfg.image_width - v.width;
    const double span_s = static_cast<double>(v.exit_frame - v.entry_frame - 1) / cfg.frame_rate_hz;
    const double speed = o.speed_px_s.value_or(travel / span_s);
    if (!(speed >= 0.0) || speed * span_s > travel * (1.0 + 1e-12)) {
      throw ConfigError("vehicle " + std::to_string(i) + " speed leaves the image");
    }
    const bool rightward = lane % 2 == 0;
    v.velocity_px_s = rightward ? speed : -speed;
    v.x0 = rightward ? 0.0 : travel;
    v.y = lane * cfg.lane_height_px + (cfg.lane_height_px - v.height) / 2.0;

    if (v.co2_g_per_km) {
      v.factor_g_per_km = *v.co2_g_per_km;
      v.factor_source = FactorSource::RegistryNumeric;
    } else if (auto f = table.find(v.vehicle_class, v.fuel_type)) {
      v.factor_g_per_km = *f;
      v.factor_source = FactorSource::TableLookup;
    } else {
      v.factor_g_per_km = category_defaults.factor(v.category);
      v.factor_source = FactorSource::CategoryDefault;
    }
    v.distance_km = speed * span_s * cfg.meters_per_pixel / 1000.0;
    v.co2_grams = v.factor_g_per_km * v.distance_km;

    gt.unique_counts[v.category] += 1;
    gt.total_distance_km += v.distance_km;
    gt.total_co2_grams += v.co2_grams;
    gt.vehicles.push_back(std::move(v));
  }
  return gt;
}

std::vector<VehicleRecord> fixtures_for(const GroundTruth& gt) {
  std::vector<VehicleRecord> out;
  out.reserve(gt.vehicles.size());
  for (const auto& v : gt.vehicles) {
    out.push_back({v.plate, v.make, v.model, v.fuel_type, v.vehicle_class, v.co2_g_per_km});
  }
  return out;
}

std::string ground_truth_json(const ScenarioConfig& cfg, const GroundTruth& gt) {
  json doc;
  doc["seed"] = cfg.seed;
  doc["frame_rate_hz"] = cfg.frame_rate_hz;
  doc["frames"] = cfg.frame_count();
  doc["meters_per_pixel"] = cfg.meters_per_pixel;
  json vehicles = json::array();
  for (const auto& v : gt.vehicles) {
    vehicles.push_back({{"index", v.index},
                        {"plate", v.plate},
                        {"category", v.category},
                        {"raw_label", v.raw_label},
                        {"vehicle_class", v.vehicle_class},
                        {"fuel_type", v.fuel_type},
                        {"co2_g_per_km", v.co2_g_per_km ? json(*v.co2_g_per_km) : json(nullptr)},
                        {"entry_frame", v.entry_frame},
                        {"exit_frame", v.exit_frame},
                        {"velocity_px_s", v.velocity_px_s},
                        {"factor_g_per_km", v.factor_g_per_km},
                        {"factor_source", to_string(v.factor_source)},
                        {"distance_km", v.distance_km},
                        {"co2_grams", v.co2_grams}});
  }
  doc["vehicles"] = std::move(vehicles);
  doc["totals"] = {{"unique_counts", gt.unique_counts},
                   {"vehicles", gt.vehicles.size()},
                   {"distance_km", gt.total_distance_km},
                   {"co2_grams", gt.total_co2_grams}};
  return doc.dump(2);
}

FrameGenerator::FrameGenerator(const ScenarioConfig& cfg, const GroundTruth& gt)
    : cfg_(cfg), gt_(gt), frame_count_(cfg.frame_count()) {
  std::seed_seq seq{cfg.seed, std::uint64_t{0x6e6f697365}};
  noise_.seed(seq);
  by_entry_.resize(gt.vehicles.size());
  for (std::size_t i = 0; i < by_entry_.size(); ++i) by_entry_[i] = i;
  std::stable_sort(by_entry_.begin(), by_entry_.end(), [&](std::size_t a, std::size_t b) {
    return gt.vehicles[a].entry_frame < gt.vehicles[b].entry_frame;
  });
}

std::optional<FrameRecord> FrameGenerator::next() {
  if (frame_ >= frame_count_) return std::nullopt;
  const std::uint64_t f = frame_++;

  while (next_entry_ < by_entry_.size() && gt_.vehicles[by_entry_[next_entry_]].entry_frame <= f) {
    active_.push_back(by_entry_[next_entry_++]);
  }
  std::erase_if(active_, [&](std::size_t i) { return gt_.vehicles[i].exit_frame <= f; });
  std::sort(active_.begin(), active_.end());

  FrameRecord frame;
  frame.frame_index = f;
  frame.timestamp_ms = static_cast<std::uint64_t>(std::llround(static_cast<double>(f) * 1000.0 / cfg_.frame_rate_hz));

  std::bernoulli_distribution drop(cfg_.dropout);
  std::bernoulli_distribution read(cfg_.plate_read_prob);
  std::bernoulli_distribution corrupt(cfg_.ocr_corruption);
  std::normal_distribution<double> jitter(0.0, cfg_.box_jitter_px);

  for (std::size_t i : active_) {
    const VehiclePlan& v = gt_.vehicles[i];
    if (drop(noise_)) continue;
    Detection d;
    d.label = v.raw_label;
    // Right-to-left motion lands on 0 only up to rounding.
    const double x = std::clamp(v.x_at(f, cfg_.frame_rate_hz), 0.0, cfg_.image_width - v.width);
    d.box = {x, v.y, v.width, v.height};
    if (cfg_.box_jitter_px > 0.0) {
      d.box.x = std::max(0.0, d.box.x + jitter(noise_));
      d.box.y = std::max(0.0, d.box.y + jitter(noise_));
      d.box.w = std::max(1.0, d.box.w + jitter(noise_));
      d.box.h = std::max(1.0, d.box.h + jitter(noise_));
    }
    d.confidence = uniform(noise_, cfg_.conf_min, cfg_.conf_max);
    if (read(noise_)) {
      std::string text = v.plate;
      if (corrupt(noise_)) {
        const std::size_t pos = std::uniform_int_distribution<std::size_t>(0, text.size() - 1)(noise_);
        // Draw from the other 35 symbols so the read really changes.
        std::size_t k = std::uniform_int_distribution<std::size_t>(0, kAlnum.size() - 2)(noise_);
        if (kAlnum[k] == text[pos]) k = kAlnum.size() - 1;
        text[pos] = kAlnum[k];
      }
      d.plate_candidates.push_back({text, uniform(noise_, cfg_.plate_conf_min, cfg_.plate_conf_max)});
    }
    frame.detections.push_back(std::move(d));
  }
  return frame;
}

void generate(const ScenarioConfig& cfg, std::ostream& stream, std::ostream& ground_truth, std::ostream& fixtures) {
  const GroundTruth gt = plan(cfg);
  FrameGenerator gen(cfg, gt);
  while (auto frame = gen.next()) stream << serialize_frame(*frame) << '\n';
  ground_truth << ground_truth_json(cfg, gt) << '\n';
  const auto records = fixtures_for(gt);
  fixtures << fixtures_json(records) << '\n';
}

}  // namespace co2stream::scenario
