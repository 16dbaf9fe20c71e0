#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "co2stream/lru_cache.hpp"
#include "co2stream/plate.hpp"

namespace co2stream {

/// Vehicle attributes returned by the enquiry API.
struct VehicleRecord {
  std::string registration;
  std::string make;
  std::string model;
  std::string fuel_type;
  std::string vehicle_class;
  std::optional<double> co2_g_per_km;

  bool operator==(const VehicleRecord&) const = default;
};

class RegistryError : public std::runtime_error {
 public:
  enum class Kind { NotFound, Unavailable, MalformedResponse };

  RegistryError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class FixtureParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BindFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Strict decode of one record; throws RegistryError(MalformedResponse).
VehicleRecord parse_vehicle_record(std::string_view json_text);
std::string vehicle_record_json(const VehicleRecord& record);

std::vector<VehicleRecord> parse_fixtures(std::string_view json_text);
std::vector<VehicleRecord> load_fixtures(const std::filesystem::path& path);
std::string fixtures_json(std::span<const VehicleRecord> records);

struct RegistryConfig {
  std::string base_url = "http://127.0.0.1:8080";
  int timeout_ms = 1000;
  int max_retries = 2;
  int backoff_ms = 50;
  std::size_t cache_capacity = 1024;
  int cache_ttl_s = 300;

  void validate() const;

  /// Upper bound on the wall time of one uncached lookup, excluding scheduler slack.
  int worst_case_ms() const;
};

/// Value of CO2STREAM_REGISTRY_URL, when set and non-empty.
std::optional<std::string> registry_url_from_env();

/// HTTP client for POST {base_url}/vehicles with retries and a TTL'd LRU cache.
/// Safe to call from several threads.
class RegistryClient {
 public:
  explicit RegistryClient(RegistryConfig cfg);

  VehicleRecord lookup(const NormalizedPlate& plate);

  /// HTTP requests issued so far, retries included.
  std::size_t network_requests() const { return requests_.load(); }
  const RegistryConfig& config() const { return cfg_; }

 private:
  VehicleRecord fetch(const NormalizedPlate& plate);

  RegistryConfig cfg_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  LruCache<std::string, VehicleRecord> cache_;
  std::atomic<std::size_t> requests_{0};
};

enum class InjectedFault { Timeout, ServerError };

struct MockOptions {
  /// How long a Timeout fault holds the request before answering 504.
  int fault_delay_ms = 1000;
};

/// In-process stand-in for the vehicle enquiry API.
///
///   POST /vehicles      {"registrationNumber": "..."} -> 200 record | 404 {"error":"not found"}
///   GET  /metrics/hits  per-plate request counts
///   POST /faults        ["timeout","500",...] queued for the next requests
///
/// A request header `X-Inject-Fault: timeout|500` faults that single request.
class MockRegistryServer {
 public:
  explicit MockRegistryServer(std::vector<VehicleRecord> fixtures, MockOptions options = {});
  ~MockRegistryServer();
  MockRegistryServer(const MockRegistryServer&) = delete;
  MockRegistryServer& operator=(const MockRegistryServer&) = delete;

  /// Binds and starts serving on a background thread. Port 0 picks a free port.
  void start(const std::string& host = "127.0.0.1", int port = 0);
  void stop();

  int port() const;
  std::string url() const;
  std::map<std::string, std::size_t> hits() const;
  void inject_faults(std::vector<InjectedFault> faults);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::unique_ptr<MockRegistryServer> serve_mock(const std::filesystem::path& fixtures, const std::string& host,
                                               int port, MockOptions options = {});

}  // namespace co2stream
