#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mocomp/annotation.hpp"
#include "mocomp/planner.hpp"
#include "mocomp/registry.hpp"

namespace mocomp {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  // "host:port" or ":port". Throws std::invalid_argument.
  static Endpoint parse(std::string_view text);
  std::string str() const;
};

enum class BackendKind { Builtin, External };

struct ServeOptions {
  Endpoint listen{"127.0.0.1", 8765};
  BackendKind backend = BackendKind::Builtin;
  Endpoint command_addr{"127.0.0.1", 9101};
  Endpoint telemetry_addr{"127.0.0.1", 9102};
  bool record_keyboard = true;
  std::filesystem::path out_dir = "sessions";
  std::uint64_t seed = 0;
  PlannerLimits limits;
  int state_period_ticks = 10;  // 10 ms ticks between state broadcasts
  bool handle_signals = false;  // stop on SIGINT/SIGTERM
  std::function<void(const std::string&)> log;
};

// The live bridge: frontend websocket channel, 20 Hz command scheduler and
// telemetry intake, driven by one event loop paced at 10 ms ticks.
//
// Frontend records, server to client:
//   {"type":"registry","modes":[...]}                on connect
//   {"type":"state", ...}                            every state period
//   {"type":"recipe_status","status":..,"segment":..} on segment changes
//   {"type":"session_saved","session_id":..,"path":..}
//   {"type":"error","error":..,"message":..}         rejected events
class Service {
 public:
  Service(const Registry& registry, const Banks& banks, ServeOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds the frontend port and, for an external backend, connects to it.
  // Throws PortInUse, BackendUnavailable.
  void start();
  // Bound frontend port (useful when asked for port 0).
  std::uint16_t port() const;
  // Blocks until stop().
  void run();
  // Safe from any thread.
  void stop();

 private:
  friend class WsClient;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct BackendServerOptions {
  Endpoint command_addr{"127.0.0.1", 9101};
  Endpoint telemetry_addr{"127.0.0.1", 9102};
  PlannerLimits limits;
  int initial_mode = 1;
  bool handle_signals = false;
  std::function<void(const std::string&)> log;
};

// The reference backend as a standalone process: accepts command frames on
// one port and streams 50 Hz telemetry frames on another. Its clock follows
// the command timestamps.
class BackendServer {
 public:
  BackendServer(const Registry& registry, BackendServerOptions options);
  ~BackendServer();
  BackendServer(const BackendServer&) = delete;
  BackendServer& operator=(const BackendServer&) = delete;

  // Throws PortInUse.
  void start();
  std::uint16_t command_port() const;
  std::uint16_t telemetry_port() const;
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mocomp
