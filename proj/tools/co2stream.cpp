// co2stream: detection streams in, per-vehicle CO2 estimates out.

#include <atomic>
#include <cctype>
#include <cmath>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "co2stream/config.hpp"
#include "co2stream/ingest.hpp"
#include "co2stream/metrics.hpp"
#include "co2stream/pipeline.hpp"
#include "co2stream/registry.hpp"
#include "co2stream/report.hpp"
#include "co2stream/scenario.hpp"

namespace fs = std::filesystem;
using namespace co2stream;
using json = nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kDataError = 1;
constexpr int kUsageError = 2;

/// Problems with flags or configuration rather than with the data.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

struct Common {
  std::string input = "-";
  std::string out = "-";
  std::string config;
  std::optional<double> window_s;
  std::string format = "json";
};

void add_common(CLI::App* sub, Common& c, bool windowed) {
  sub->add_option("--input,-i", c.input, "JSONL detection stream ('-' for stdin)");
  sub->add_option("--out,-o", c.out, "output path ('-' for stdout)");
  sub->add_option("--config,-c", c.config, "key = value config file");
  sub->add_option("--format", c.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  if (windowed) sub->add_option("--window-s", c.window_s, "report window length in seconds (0: one window)");
}

KeyValueConfig load_kv(const std::string& path) {
  if (path.empty()) return {};
  try {
    return KeyValueConfig::load(path);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
}

PipelineConfig pipeline_config(const Common& c) {
  try {
    PipelineConfig cfg = pipeline_config_from(load_kv(c.config));
    if (auto env = registry_url_from_env()) cfg.registry_url = *env;
    if (c.window_s) cfg.window_s = *c.window_s;
    if (cfg.registry_url) cfg.registry.base_url = *cfg.registry_url;
    cfg.validate();
    return cfg;
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

class Input {
 public:
  explicit Input(const std::string& path) {
    if (path == "-") return;
    file_.open(path);
    if (!file_) throw UsageError("cannot open input " + path);
  }
  std::istream& stream() { return file_.is_open() ? static_cast<std::istream&>(file_) : std::cin; }

 private:
  std::ifstream file_;
};

class Output {
 public:
  explicit Output(const std::string& path) {
    if (path == "-") return;
    file_.open(path);
    if (!file_) throw UsageError("cannot open output " + path);
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

template <class F>
void for_each_frame(const std::string& input, F&& f) {
  Input in(input);
  FrameReader reader(in.stream());
  while (auto frame = reader.next()) f(*frame);
}

int run_track(const Common& c) {
  const PipelineConfig cfg = pipeline_config(c);
  Output out(c.out);
  auto& os = out.stream();
  const bool csv = parse_report_format(c.format) == ReportFormat::Csv;
  if (csv) os << "frame,timestamp_ms,track_id,label,category,confidence,x,y,w,h\n";
  ByteTracker tracker(cfg.tracker);
  for_each_frame(c.input, [&](const FrameRecord& frame) {
    for (const auto& e : tracker.step(frame)) {
      const auto& d = e.detection;
      const std::string category = map_label(d.label, cfg.classmap);
      if (csv) {
        os << frame.frame_index << ',' << frame.timestamp_ms << ',' << e.track_id << ',' << d.label << ','
           << category << ',' << d.confidence << ',' << d.box.x << ',' << d.box.y << ',' << d.box.w << ','
           << d.box.h << '\n';
      } else {
        json plates = json::array();
        for (const auto& p : d.plate_candidates) plates.push_back({{"text", p.text}, {"conf", p.confidence}});
        os << json{{"frame", frame.frame_index},
                   {"ts_ms", frame.timestamp_ms},
                   {"track", e.track_id},
                   {"label", d.label},
                   {"category", category},
                   {"conf", d.confidence},
                   {"box", {d.box.x, d.box.y, d.box.w, d.box.h}},
                   {"plates", std::move(plates)}}
                  .dump()
           << '\n';
      }
    }
  });
  return kOk;
}

int run_count(const Common& c) {
  PipelineConfig cfg = pipeline_config(c);
  Output out(c.out);
  ReportWriter writer(out.stream(), parse_report_format(c.format), true);
  StreamProcessor proc(cfg, {}, [&](const SegmentReport& r) { writer.write(r); });
  for_each_frame(c.input, [&](const FrameRecord& f) { proc.process(f); });
  proc.finish();
  writer.close();
  return kOk;
}

int run_plates(const Common& c) {
  PipelineConfig cfg = pipeline_config(c);
  Output out(c.out);
  auto& os = out.stream();
  const bool csv = parse_report_format(c.format) == ReportFormat::Csv;
  if (csv) os << "track_id,category,plate,status,support,score,first_seen_ms,last_seen_ms\n";
  StreamProcessor proc(cfg, {}, {}, [&](const VehicleResult& r) {
    if (csv) {
      os << r.estimate.track_id << ',' << r.category << ',' << (r.plate.plate ? r.plate.plate->text() : "") << ','
         << to_string(r.plate.status) << ',' << r.plate.support << ',' << r.plate.score << ','
         << r.estimate.first_seen_ms << ',' << r.estimate.last_seen_ms << '\n';
    } else {
      os << vehicle_result_json(r) << '\n';
    }
  });
  for_each_frame(c.input, [&](const FrameRecord& f) { proc.process(f); });
  proc.finish();
  return kOk;
}

int run_estimate(const Common& c, const std::optional<std::string>& registry_url,
                 const std::optional<std::string>& fixtures, bool print_stats) {
  PipelineConfig cfg = pipeline_config(c);
  if (registry_url) {
    cfg.registry_url = *registry_url;
    cfg.registry.base_url = *registry_url;
  }

  LookupFn lookup;
  std::shared_ptr<RegistryClient> client;
  if (cfg.registry_url) {
    client = std::make_shared<RegistryClient>(cfg.registry);
    lookup = [client](const NormalizedPlate& p) { return client->lookup(p); };
    if (fixtures) warn("--fixtures ignored because a registry URL is set");
  } else if (fixtures) {
    lookup = fixture_lookup(load_fixtures(*fixtures));
  } else {
    warn("no registry configured; every vehicle uses its category default factor");
  }

  Output out(c.out);
  ReportWriter writer(out.stream(), parse_report_format(c.format));
  StreamProcessor proc(
      cfg, lookup, [&](const SegmentReport& r) { writer.write(r); }, {}, warn);
  const auto t0 = std::chrono::steady_clock::now();
  for_each_frame(c.input, [&](const FrameRecord& f) { proc.process(f); });
  proc.finish();
  writer.close();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (print_stats) {
    const auto& s = proc.stats();
    std::cerr << json{{"frames", s.frames},
                      {"detections", s.detections},
                      {"vehicles", s.vehicles},
                      {"lookups", s.lookups},
                      {"lookup_failures", s.lookup_failures},
                      {"peak_live_tracks", s.peak_live_tracks},
                      {"peak_pending", s.peak_pending_lookups},
                      {"seconds", secs},
                      {"detections_per_s", secs > 0 ? s.detections / secs : 0.0}}
                     .dump()
              << '\n';
  }
  return kOk;
}

int run_validate(const std::string& input) {
  Input in(input);
  FrameReader reader(in.stream());
  StreamValidator validator;
  while (auto frame = reader.next()) validator.push(*frame);
  const auto& s = validator.summary();
  json out = {{"frames", s.frames}, {"detections", s.detections}, {"violations", s.clean() ? 0 : 1}};
  if (!s.clean()) {
    out["violation"] = {{"record_index", s.violation->record_index}, {"reason", s.violation->reason}};
    std::cerr << "error: record " << s.violation->record_index << ": " << s.violation->reason << '\n';
  }
  std::cout << out.dump() << '\n';
  return s.clean() ? kOk : kDataError;
}

struct GenOptions {
  std::string config;
  std::string out = "-";
  std::string ground_truth;
  std::string fixtures;
  std::optional<std::uint64_t> seed;
  std::optional<int> vehicles;
  std::optional<double> duration_s;
  std::optional<double> fps;
  std::optional<double> dropout;
  std::optional<double> ocr_corruption;
  std::optional<double> jitter_px;
};

int run_gen(const GenOptions& g) {
  scenario::ScenarioConfig cfg;
  try {
    cfg = scenario::scenario_config_from(load_kv(g.config));
    if (g.seed) cfg.seed = *g.seed;
    if (g.vehicles) cfg.n_vehicles = *g.vehicles;
    if (g.duration_s) cfg.duration_s = *g.duration_s;
    if (g.fps) cfg.frame_rate_hz = *g.fps;
    if (g.dropout) cfg.dropout = *g.dropout;
    if (g.ocr_corruption) cfg.ocr_corruption = *g.ocr_corruption;
    if (g.jitter_px) cfg.box_jitter_px = *g.jitter_px;
    cfg.validate();
  } catch (const UsageError&) {
    throw;
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }

  const scenario::GroundTruth gt = [&] {
    try {
      return scenario::plan(cfg);
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
  }();
  Output out(g.out);
  scenario::FrameGenerator gen(cfg, gt);
  while (auto frame = gen.next()) out.stream() << serialize_frame(*frame) << '\n';
  out.stream().flush();
  if (!g.ground_truth.empty()) {
    Output gt_out(g.ground_truth);
    gt_out.stream() << scenario::ground_truth_json(cfg, gt) << '\n';
  }
  if (!g.fixtures.empty()) {
    Output fx(g.fixtures);
    const auto records = scenario::fixtures_for(gt);
    fx.stream() << fixtures_json(records) << '\n';
  }
  return kOk;
}

int run_serve_mock(const std::string& fixtures, const std::string& host, int port, int fault_delay_ms) {
  auto server = serve_mock(fixtures, host, port, MockOptions{fault_delay_ms});
  std::cout << server->url() << std::endl;
  std::cerr << "mock registry listening on " << server->url() << '\n';
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  server->stop();
  return kOk;
}

struct EvalOptions {
  std::string gt;
  std::string preds;
  std::string out_dir = "eval_out";
  double curve_iou = 0.5;
  double conf = 0.25;
  double confusion_iou = 0.45;
  bool masks = false;
  bool raster = false;
};

void write_curve(const fs::path& path, const std::vector<metrics::CurvePoint>& pts) {
  Output out(path.string());
  auto& os = out.stream();
  os.precision(17);
  os << "confidence,precision,recall,f1\n";
  for (const auto& p : pts) os << p.confidence << ',' << p.precision << ',' << p.recall << ',' << p.f1 << '\n';
}

/// Keeps class names usable as file names.
std::string file_safe(const std::string& s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_';
  return out;
}

void write_matrix(const fs::path& path, const metrics::ConfusionMatrix& m) {
  Output out(path.string());
  auto& os = out.stream();
  os << "actual\\predicted";
  for (const auto& l : m.labels) os << ',' << l;
  os << '\n';
  for (Eigen::Index r = 0; r < m.values.rows(); ++r) {
    os << m.labels[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < m.values.cols(); ++c) os << ',' << m.values(r, c);
    os << '\n';
  }
}

int run_eval(const EvalOptions& o) {
  std::vector<ImageRecord> gt_records;
  std::vector<ImageRecord> pred_records;
  {
    Input in(o.gt);
    gt_records = read_image_records(in.stream(), false);
  }
  {
    Input in(o.preds);
    pred_records = read_image_records(in.stream(), true);
  }
  const auto gts = metrics::ground_truth_from(gt_records);
  const auto preds = metrics::predictions_from(pred_records);
  const auto kind = o.raster  ? metrics::IouKind::MaskRaster
                    : o.masks ? metrics::IouKind::Mask
                              : metrics::IouKind::Box;

  fs::create_directories(o.out_dir);
  const fs::path dir(o.out_dir);

  const auto m50 = metrics::map_at(preds, gts, 0.5, kind);
  const auto m5095 = metrics::map_50_95(preds, gts, kind);
  const auto curve = metrics::f1_confidence_curve(preds, gts, o.curve_iou, kind);
  const auto classes = metrics::class_list(preds, gts);
  const auto cm = metrics::confusion_matrix(preds, gts, classes, o.conf, o.confusion_iou,
                                            metrics::ConfusionMode::Raw, kind);

  for (const auto& [cls, pts] : curve.per_class) write_curve(dir / ("curve_" + file_safe(cls) + ".csv"), pts);
  write_curve(dir / "curve_all.csv", curve.all_classes);
  write_matrix(dir / "confusion_matrix.csv", cm);
  write_matrix(dir / "confusion_matrix_normalized.csv", metrics::row_normalized(cm));

  metrics::LabelStats stats;
  try {
    stats = metrics::label_stats(gts, true);
  } catch (const metrics::MissingImageSize& e) {
    warn(std::string(e.what()) + "; label statistics are not normalized");
    stats = metrics::label_stats(gts, false);
  }
  {
    Output out((dir / "label_stats.json").string());
    json hist = json::object();
    const char* names[] = {"cx", "cy", "w", "h"};
    for (std::size_t i = 0; i < 4; ++i) hist[names[i]] = stats.histograms[i];
    out.stream() << json{{"instances", stats.instances}, {"histograms", hist}}.dump(2) << '\n';
  }

  auto nan_safe = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
  json ap50 = json::object();
  for (const auto& [cls, ap] : m50.ap_per_class) ap50[cls] = nan_safe(ap);
  json ap5095 = json::object();
  for (const auto& [cls, ap] : m5095.ap_per_class) ap5095[cls] = nan_safe(ap);
  const json summary = {{"images", gts.size()},
                        {"predictions", preds.size()},
                        {"iou_kind", o.raster ? "mask-raster" : o.masks ? "mask" : "box"},
                        {"map50", nan_safe(m50.mean)},
                        {"map50_95", nan_safe(m5095.mean)},
                        {"ap50_per_class", ap50},
                        {"ap50_95_per_class", ap5095},
                        {"curve_iou", o.curve_iou},
                        {"best_confidence", curve.best_confidence},
                        {"best_f1", curve.best_f1},
                        {"confusion_conf", o.conf},
                        {"confusion_iou", o.confusion_iou}};
  {
    Output out((dir / "summary.json").string());
    out.stream() << summary.dump(2) << '\n';
  }
  std::cout << summary.dump() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vehicle tracking, counting and CO2 estimation over detection streams"};
  app.require_subcommand(1);

  Common track_opts, count_opts, plates_opts, estimate_opts;
  auto* track = app.add_subcommand("track", "stream -> per-frame track assignments");
  add_common(track, track_opts, false);
  auto* count = app.add_subcommand("count", "stream -> unique vehicle counts");
  add_common(count, count_opts, true);
  auto* plates = app.add_subcommand("plates", "stream -> per-vehicle plate consensus");
  add_common(plates, plates_opts, false);

  auto* estimate = app.add_subcommand("estimate", "stream -> CO2 segment report");
  add_common(estimate, estimate_opts, true);
  std::optional<std::string> registry_url, fixtures;
  bool print_stats = false;
  estimate->add_option("--registry-url", registry_url, "vehicle registry base URL");
  estimate->add_option("--fixtures", fixtures, "resolve plates from a fixture file instead of HTTP");
  estimate->add_flag("--stats", print_stats, "print throughput statistics to stderr");

  EvalOptions eval_opts;
  auto* eval = app.add_subcommand("eval", "ground truth + predictions -> detection metrics");
  eval->add_option("--gt", eval_opts.gt, "ground-truth JSONL")->required();
  eval->add_option("--preds,--input", eval_opts.preds, "prediction JSONL")->required();
  eval->add_option("--out,-o", eval_opts.out_dir, "output directory");
  eval->add_option("--curve-iou", eval_opts.curve_iou, "IoU threshold for curves")->check(CLI::Range(0.0, 1.0));
  eval->add_option("--conf", eval_opts.conf, "confusion-matrix confidence threshold")->check(CLI::Range(0.0, 1.0));
  eval->add_option("--iou", eval_opts.confusion_iou, "confusion-matrix IoU threshold")->check(CLI::Range(0.0, 1.0));
  eval->add_flag("--masks", eval_opts.masks, "use mask IoU instead of box IoU");
  eval->add_flag("--raster", eval_opts.raster, "rasterized mask IoU (cross-check for --masks)");

  std::string mock_fixtures, mock_host = "127.0.0.1";
  int mock_port = 8080, fault_delay_ms = 1000;
  auto* serve = app.add_subcommand("serve-mock", "run the mock vehicle registry");
  serve->add_option("--fixtures", mock_fixtures, "fixture JSON")->required();
  serve->add_option("--host", mock_host);
  serve->add_option("--port", mock_port, "0 picks a free port")->check(CLI::Range(0, 65535));
  serve->add_option("--fault-delay-ms", fault_delay_ms)->check(CLI::NonNegativeNumber);

  GenOptions gen_opts;
  auto* gen = app.add_subcommand("gen", "generate a synthetic scenario");
  gen->add_option("--config,-c", gen_opts.config);
  gen->add_option("--out,-o", gen_opts.out, "detection stream path ('-' for stdout)");
  gen->add_option("--ground-truth", gen_opts.ground_truth, "ground-truth JSON path");
  gen->add_option("--fixtures", gen_opts.fixtures, "registry fixture path");
  gen->add_option("--seed", gen_opts.seed);
  gen->add_option("--vehicles", gen_opts.vehicles);
  gen->add_option("--duration-s", gen_opts.duration_s);
  gen->add_option("--fps", gen_opts.fps);
  gen->add_option("--dropout", gen_opts.dropout);
  gen->add_option("--ocr-corruption", gen_opts.ocr_corruption);
  gen->add_option("--jitter-px", gen_opts.jitter_px);

  std::string validate_input = "-";
  auto* validate = app.add_subcommand("validate", "check a detection stream");
  validate->add_option("--input,-i", validate_input);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsageError;
  }

  try {
    if (*track) return run_track(track_opts);
    if (*count) return run_count(count_opts);
    if (*plates) return run_plates(plates_opts);
    if (*estimate) return run_estimate(estimate_opts, registry_url, fixtures, print_stats);
    if (*eval) return run_eval(eval_opts);
    if (*serve) return run_serve_mock(mock_fixtures, mock_host, mock_port, fault_delay_ms);
    if (*gen) return run_gen(gen_opts);
    if (*validate) return run_validate(validate_input);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const BindFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsageError;
}
