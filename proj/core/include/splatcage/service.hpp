#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace splatcage {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path workspace = "splatcage-workspace";
  std::string guidance = "mock";  // "mock", "none" or an http:// endpoint
  bool cors = true;
};

/// Reads a JSON config file (keys: host, port, workspace, guidance, cors).
ServiceConfig load_service_config(const std::filesystem::path& path, ServiceConfig base = {});
/// Overrides from SPLATCAGE_HOST, SPLATCAGE_PORT, SPLATCAGE_WORKSPACE, SPLATCAGE_GUIDANCE.
ServiceConfig apply_env(ServiceConfig config);

/// Local HTTP front end for scenes, cages, deformation jobs and animations.
/// All state lives on disk under the workspace; job records survive restarts.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the listening socket; returns the bound port.
  int bind();
  /// Serves until stop(). Calls bind() first if needed.
  void serve();
  void stop();
  /// Blocks until no job is queued or running.
  void wait_idle();

  const ServiceConfig& config() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct TarEntry {
  std::string name;
  std::vector<std::uint8_t> data;
};

/// POSIX ustar archive with zero mtimes, so equal inputs give equal bytes.
std::vector<std::uint8_t> make_tar(std::span<const TarEntry> entries);
std::vector<TarEntry> read_tar(std::span<const std::uint8_t> bytes);

}  // namespace splatcage
