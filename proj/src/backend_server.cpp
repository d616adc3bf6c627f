#include <charconv>
#include <cstdlib>
#include <deque>
#include <iostream>

#include "mocomp/backend.hpp"
#include "mocomp/protocol.hpp"
#include "net_util.hpp"

namespace mocomp {

using detail::tcp;
namespace net = boost::asio;

Endpoint Endpoint::parse(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos) throw std::invalid_argument(fmt::format("'{}' is not host:port", text));
  Endpoint ep;
  const auto host = text.substr(0, colon);
  if (!host.empty()) ep.host = std::string(host);
  const auto port = text.substr(colon + 1);
  unsigned value = 0;
  const auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
  if (port.empty() || ec != std::errc{} || ptr != port.data() + port.size() || value > 65535) {
    throw std::invalid_argument(fmt::format("'{}' has no valid port", text));
  }
  ep.port = static_cast<std::uint16_t>(value);
  return ep;
}

std::string Endpoint::str() const { return fmt::format("{}:{}", host, port); }

namespace {
constexpr std::int64_t kResyncThresholdMs = 100;
constexpr std::size_t kMaxQueuedFrames = 256;
}  // namespace

struct BackendServer::Impl {
  Impl(const Registry& registry, BackendServerOptions opts)
      : options(std::move(opts)),
        backend(registry, options.limits, options.initial_mode),
        command_acceptor(ioc),
        telemetry_acceptor(ioc),
        timer(ioc),
        signals(ioc) {}

  void log(const std::string& msg) const {
    if (options.log) options.log(msg);
  }

  void accept_commands() {
    command_acceptor.async_accept([this](boost::system::error_code ec, tcp::socket s) {
      if (ec) return;
      log("bridge attached to command port");
      command_socket = std::make_unique<tcp::socket>(std::move(s));
      splitter = FrameSplitter{};
      read_commands();
      accept_commands();
    });
  }

  void read_commands() {
    auto* sock = command_socket.get();
    sock->async_read_some(net::buffer(read_buf), [this, sock](boost::system::error_code ec, std::size_t n) {
      if (sock != command_socket.get()) return;
      if (ec) {
        log("command connection closed");
        command_socket.reset();
        return;
      }
      splitter.feed(std::string_view(read_buf.data(), n));
      while (auto frame = splitter.next()) {
        try {
          const MetaCommand cmd = decode_command(*frame);
          if (std::llabs(cmd.timestamp_ms - backend.state().time_ms) > kResyncThresholdMs) {
            backend.resync(cmd.timestamp_ms);
          }
          backend.on_command(cmd);
        } catch (const Error& e) {
          log(std::string("rejected command frame: ") + e.what());
        }
      }
      read_commands();
    });
  }

  void accept_telemetry() {
    telemetry_acceptor.async_accept([this](boost::system::error_code ec, tcp::socket s) {
      if (ec) return;
      log("bridge attached to telemetry port");
      telemetry_socket = std::make_unique<tcp::socket>(std::move(s));
      out_queue.clear();
      accept_telemetry();
    });
  }

  void send_telemetry(std::string frame) {
    if (!telemetry_socket) return;
    if (out_queue.size() >= kMaxQueuedFrames) return;
    out_queue.push_back(std::move(frame));
    if (out_queue.size() == 1) write_next();
  }

  void write_next() {
    auto* sock = telemetry_socket.get();
    net::async_write(*sock, net::buffer(out_queue.front()), [this, sock](boost::system::error_code ec, std::size_t) {
      if (sock != telemetry_socket.get()) return;
      if (ec) {
        log("telemetry connection closed");
        telemetry_socket.reset();
        out_queue.clear();
        return;
      }
      out_queue.pop_front();
      if (!out_queue.empty()) write_next();
    });
  }

  void schedule() {
    next_deadline += std::chrono::milliseconds(kTelemetryPeriodMs);
    timer.expires_at(next_deadline);
    timer.async_wait([this](boost::system::error_code ec) {
      if (ec) return;
      send_telemetry(backend.sample_frame());
      backend.advance();
      schedule();
    });
  }

  BackendServerOptions options;
  net::io_context ioc;
  ReferenceBackend backend;
  tcp::acceptor command_acceptor;
  tcp::acceptor telemetry_acceptor;
  net::steady_timer timer;
  net::signal_set signals;
  std::chrono::steady_clock::time_point next_deadline;
  std::unique_ptr<tcp::socket> command_socket;
  std::unique_ptr<tcp::socket> telemetry_socket;
  std::array<char, 4096> read_buf{};
  FrameSplitter splitter;
  std::deque<std::string> out_queue;
};

BackendServer::BackendServer(const Registry& registry, BackendServerOptions options)
    : impl_(std::make_unique<Impl>(registry, std::move(options))) {}

BackendServer::~BackendServer() = default;

void BackendServer::start() {
  detail::listen_on(impl_->ioc, impl_->command_acceptor, impl_->options.command_addr);
  detail::listen_on(impl_->ioc, impl_->telemetry_acceptor, impl_->options.telemetry_addr);
  impl_->accept_commands();
  impl_->accept_telemetry();
  impl_->next_deadline = std::chrono::steady_clock::now();
  impl_->schedule();
  if (impl_->options.handle_signals) {
    impl_->signals.add(SIGINT);
    impl_->signals.add(SIGTERM);
    impl_->signals.async_wait([this](boost::system::error_code ec, int) {
      if (!ec) impl_->ioc.stop();
    });
  }
}

std::uint16_t BackendServer::command_port() const { return impl_->command_acceptor.local_endpoint().port(); }
std::uint16_t BackendServer::telemetry_port() const { return impl_->telemetry_acceptor.local_endpoint().port(); }

void BackendServer::run() { impl_->ioc.run(); }

void BackendServer::stop() { impl_->ioc.stop(); }

}  // namespace mocomp
