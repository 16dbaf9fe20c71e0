#include "co2stream/registry.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace co2stream {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 4> kFuelTypes{"Gasoline", "Diesel", "Hybrid", "Electric"};

[[noreturn]] void malformed(const std::string& what) {
  throw RegistryError(RegistryError::Kind::MalformedResponse, "malformed vehicle record: " + what);
}

std::string require_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) malformed(std::string("missing '") + key + "'");
  if (!it->is_string()) malformed(std::string("'") + key + "' must be a string");
  return it->get<std::string>();
}

VehicleRecord record_from_json(const json& j) {
  if (!j.is_object()) malformed("expected object");
  VehicleRecord r;
  r.registration = require_string(j, "registration");
  r.make = require_string(j, "make");
  r.model = require_string(j, "model");
  r.fuel_type = require_string(j, "fuel_type");
  r.vehicle_class = require_string(j, "vehicle_class");
  if (auto it = j.find("co2_g_per_km"); it != j.end() && !it->is_null()) {
    if (!it->is_number()) malformed("'co2_g_per_km' must be a number");
    const double v = it->get<double>();
    if (!std::isfinite(v) || v < 0.0) malformed("'co2_g_per_km' must be a nonnegative number");
    r.co2_g_per_km = v;
  }
  auto plate = try_normalize(r.registration);
  if (!std::holds_alternative<NormalizedPlate>(plate) ||
      std::get<NormalizedPlate>(plate).text() != r.registration) {
    malformed("registration '" + r.registration + "' is not a normalized plate");
  }
  if (std::find(kFuelTypes.begin(), kFuelTypes.end(), r.fuel_type) == kFuelTypes.end()) {
    malformed("unknown fuel_type '" + r.fuel_type + "'");
  }
  if (r.fuel_type == "Electric" && r.co2_g_per_km && *r.co2_g_per_km != 0.0) {
    malformed("electric vehicle with nonzero co2_g_per_km");
  }
  return r;
}

json record_to_json(const VehicleRecord& r) {
  json j{{"registration", r.registration},
         {"make", r.make},
         {"model", r.model},
         {"fuel_type", r.fuel_type},
         {"vehicle_class", r.vehicle_class}};
  if (r.co2_g_per_km) j["co2_g_per_km"] = *r.co2_g_per_km;
  return j;
}

}  // namespace

VehicleRecord parse_vehicle_record(std::string_view json_text) {
  json j = json::parse(json_text.begin(), json_text.end(), nullptr, false);
  if (j.is_discarded()) malformed("invalid JSON");
  return record_from_json(j);
}

std::string vehicle_record_json(const VehicleRecord& record) { return record_to_json(record).dump(); }

std::vector<VehicleRecord> parse_fixtures(std::string_view json_text) {
  json j = json::parse(json_text.begin(), json_text.end(), nullptr, false);
  if (j.is_discarded()) throw FixtureParseError("fixture file is not valid JSON");
  if (!j.is_array()) throw FixtureParseError("fixture file must be a JSON array of vehicle records");
  std::vector<VehicleRecord> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    try {
      out.push_back(record_from_json(j[i]));
    } catch (const RegistryError& e) {
      throw FixtureParseError("fixture entry " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

std::vector<VehicleRecord> load_fixtures(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FixtureParseError("cannot open fixture file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_fixtures(ss.str());
}

std::string fixtures_json(std::span<const VehicleRecord> records) {
  json arr = json::array();
  for (const auto& r : records) arr.push_back(record_to_json(r));
  return arr.dump(2);
}

void RegistryConfig::validate() const {
  if (timeout_ms <= 0) throw std::invalid_argument("registry.timeout_ms must be positive");
  if (max_retries < 0) throw std::invalid_argument("registry.max_retries must be >= 0");
  if (backoff_ms < 0) throw std::invalid_argument("registry.backoff_ms must be >= 0");
  if (cache_ttl_s < 0) throw std::invalid_argument("registry.cache_ttl_s must be >= 0");
}

int RegistryConfig::worst_case_ms() const {
  int total = (max_retries + 1) * timeout_ms;
  for (int k = 0; k < max_retries; ++k) total += backoff_ms << k;
  return total;
}

std::optional<std::string> registry_url_from_env() {
  const char* v = std::getenv("CO2STREAM_REGISTRY_URL");
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

RegistryClient::RegistryClient(RegistryConfig cfg)
    : cfg_(std::move(cfg)), cache_(cfg_.cache_capacity, std::chrono::seconds(cfg_.cache_ttl_s)) {
  cfg_.validate();
  std::string url = cfg_.base_url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  const auto scheme_end = url.find("://");
  const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  if (path_start == std::string::npos) {
    scheme_host_port_ = url;
  } else {
    scheme_host_port_ = url.substr(0, path_start);
    path_prefix_ = url.substr(path_start);
  }
}

VehicleRecord RegistryClient::lookup(const NormalizedPlate& plate) {
  if (auto hit = cache_.get(plate.text())) return *hit;
  VehicleRecord record = fetch(plate);
  cache_.put(plate.text(), record);
  return record;
}

VehicleRecord RegistryClient::fetch(const NormalizedPlate& plate) {
  const std::string body = json{{"registrationNumber", plate.text()}}.dump();
  const std::string path = path_prefix_ + "/vehicles";
  std::string last_error = "no attempt made";

  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.backoff_ms << (attempt - 1)));

    httplib::Client client(scheme_host_port_);
    const auto timeout = std::chrono::milliseconds(cfg_.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    requests_.fetch_add(1);
    auto res = client.Post(path, body, "application/json");
    if (!res) {
      last_error = "request failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) {
      VehicleRecord record = parse_vehicle_record(res->body);
      if (record.registration != plate.text()) {
        malformed("response is for '" + record.registration + "', requested '" + plate.text() + "'");
      }
      return record;
    }
    if (res->status == 404) {
      throw RegistryError(RegistryError::Kind::NotFound, "plate " + plate.text() + " not found");
    }
    last_error = "HTTP " + std::to_string(res->status);
    if (res->status < 500) break;
  }
  throw RegistryError(RegistryError::Kind::Unavailable, "registry unavailable for " + plate.text() + ": " + last_error);
}

// ---------------------------------------------------------------------------

struct MockRegistryServer::Impl {
  std::map<std::string, VehicleRecord> fixtures;
  MockOptions options;
  httplib::Server server;
  std::thread thread;
  int port = -1;
  std::string host;

  mutable std::mutex mutex;
  std::map<std::string, std::size_t> hits;
  std::deque<InjectedFault> queued;

  std::optional<InjectedFault> next_fault(const httplib::Request& req) {
    if (req.has_header("X-Inject-Fault")) {
      const std::string v = req.get_header_value("X-Inject-Fault");
      if (v == "timeout") return InjectedFault::Timeout;
      if (v == "500") return InjectedFault::ServerError;
    }
    std::lock_guard lock(mutex);
    if (queued.empty()) return std::nullopt;
    InjectedFault f = queued.front();
    queued.pop_front();
    return f;
  }

  void install_routes() {
    server.Post("/vehicles", [this](const httplib::Request& req, httplib::Response& res) {
      json body = json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.is_object() || !body.contains("registrationNumber") ||
          !body["registrationNumber"].is_string()) {
        res.status = 400;
        res.set_content(R"({"error":"expected {\"registrationNumber\": string}"})", "application/json");
        return;
      }
      const std::string plate = body["registrationNumber"].get<std::string>();
      {
        std::lock_guard lock(mutex);
        hits[plate] += 1;
      }
      if (auto fault = next_fault(req)) {
        if (*fault == InjectedFault::Timeout) {
          std::this_thread::sleep_for(std::chrono::milliseconds(options.fault_delay_ms));
          res.status = 504;
          res.set_content(R"({"error":"injected timeout"})", "application/json");
        } else {
          res.status = 500;
          res.set_content(R"({"error":"injected failure"})", "application/json");
        }
        return;
      }
      auto it = fixtures.find(plate);
      if (it == fixtures.end()) {
        res.status = 404;
        res.set_content(R"({"error":"not found"})", "application/json");
        return;
      }
      res.set_content(record_to_json(it->second).dump(), "application/json");
    });

    server.Get("/metrics/hits", [this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard lock(mutex);
      res.set_content(json(hits).dump(), "application/json");
    });

    server.Post("/faults", [this](const httplib::Request& req, httplib::Response& res) {
      json body = json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.is_array()) {
        res.status = 400;
        return;
      }
      std::vector<InjectedFault> faults;
      for (const auto& f : body) {
        if (f == "timeout") {
          faults.push_back(InjectedFault::Timeout);
        } else if (f == "500") {
          faults.push_back(InjectedFault::ServerError);
        } else {
          res.status = 400;
          return;
        }
      }
      std::lock_guard lock(mutex);
      queued.insert(queued.end(), faults.begin(), faults.end());
      res.set_content(json{{"queued", queued.size()}}.dump(), "application/json");
    });
  }
};

MockRegistryServer::MockRegistryServer(std::vector<VehicleRecord> fixtures, MockOptions options)
    : impl_(std::make_unique<Impl>()) {
  for (auto& r : fixtures) impl_->fixtures[r.registration] = std::move(r);
  impl_->options = options;
  // httplib's default sets SO_REUSEPORT, which would let a second server share the port.
  impl_->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  impl_->install_routes();
}

MockRegistryServer::~MockRegistryServer() { stop(); }

void MockRegistryServer::start(const std::string& host, int port) {
  if (impl_->thread.joinable()) throw BindFailure("mock registry already running");
  int bound = -1;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (impl_->server.bind_to_port(host, port)) {
    bound = port;
  }
  if (bound < 0) throw BindFailure("cannot bind mock registry to " + host + ":" + std::to_string(port));
  impl_->port = bound;
  impl_->host = host;
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void MockRegistryServer::stop() {
  if (!impl_ || !impl_->thread.joinable()) return;
  impl_->server.stop();
  impl_->thread.join();
}

int MockRegistryServer::port() const { return impl_->port; }

std::string MockRegistryServer::url() const { return "http://" + impl_->host + ":" + std::to_string(impl_->port); }

std::map<std::string, std::size_t> MockRegistryServer::hits() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->hits;
}

void MockRegistryServer::inject_faults(std::vector<InjectedFault> faults) {
  std::lock_guard lock(impl_->mutex);
  impl_->queued.insert(impl_->queued.end(), faults.begin(), faults.end());
}

std::unique_ptr<MockRegistryServer> serve_mock(const std::filesystem::path& fixtures, const std::string& host,
                                               int port, MockOptions options) {
  auto server = std::make_unique<MockRegistryServer>(load_fixtures(fixtures), options);
  server->start(host, port);
  return server;
}

}  // namespace co2stream
