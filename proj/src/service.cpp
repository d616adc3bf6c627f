#include "mocomp/service.hpp"

#include <chrono>
#include <ctime>
#include <deque>
#include <set>

#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <fmt/chrono.h>

#include "mocomp/backend.hpp"
#include "mocomp/dataset.hpp"
#include "mocomp/session.hpp"
#include "net_util.hpp"

namespace mocomp {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using detail::tcp;
using nlohmann::ordered_json;

namespace {

constexpr std::int64_t kTickMs = 10;
constexpr std::int64_t kExternalDrainMs = 500;
constexpr std::size_t kMaxClientQueue = 64;

std::string utc_now_iso() { return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::time(nullptr))); }

std::string error_name(const Error& e) {
  if (dynamic_cast<const IgnoredDuringRecipe*>(&e)) return "IgnoredDuringRecipe";
  if (dynamic_cast<const InvalidRecipe*>(&e)) return "InvalidRecipe";
  if (dynamic_cast<const InvalidEvent*>(&e)) return "InvalidEvent";
  if (dynamic_cast<const UnknownMode*>(&e)) return "UnknownMode";
  return "Error";
}

ordered_json registry_record(const Registry& reg) {
  ordered_json j;
  j["type"] = "registry";
  j["modes"] = ordered_json::array();
  for (const auto& m : reg.modes()) {
    ordered_json e;
    e["index"] = m.index;
    e["name"] = m.name;
    e["group"] = group_name(m.group);
    e["speed"] = m.supports_speed;
    e["heading"] = m.supports_heading;
    e["height"] = m.supports_height;
    if (m.speed_range) e["speed_range"] = {m.speed_range->min, m.speed_range->max};
    e["default_speed"] = m.default_speed;
    if (m.height_range) e["height_range"] = {m.height_range->min, m.height_range->max};
    e["default_height"] = m.default_height;
    j["modes"].push_back(std::move(e));
  }
  return j;
}

}  // namespace

class WsClient : public std::enable_shared_from_this<WsClient> {
 public:
  WsClient(tcp::socket socket, Service::Impl& owner) : ws_(std::move(socket)), owner_(owner) {}

  void start();
  void send(std::string text);
  void close() {
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
  }

 private:
  void on_request(beast::error_code ec);
  void read();
  void write_next();

  websocket::stream<beast::tcp_stream> ws_;
  Service::Impl& owner_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> request_;
  std::shared_ptr<http::response<http::string_body>> plain_;
  std::deque<std::string> queue_;
  bool open_ = false;
};

struct Service::Impl {
  Impl(const Registry& reg, const Banks& b, ServeOptions opts)
      : registry(reg),
        banks(b),
        options(std::move(opts)),
        acceptor(ioc),
        timer(ioc),
        signals(ioc),
        session(reg, session_options()),
        annotator(reg, b) {}

  SessionOptions session_options() const {
    SessionOptions so;
    so.limits = options.limits;
    so.record_keyboard = options.record_keyboard;
    so.backend_name = options.backend == BackendKind::Builtin ? "reference-kinematic" : "external";
    so.session_prefix = fmt::format("{:%Y%m%dT%H%M%S}", fmt::gmtime(std::time(nullptr)));
    return so;
  }

  void log(const std::string& msg) const {
    if (options.log) options.log(msg);
  }

  std::int64_t now_ms() const { return tick * kTickMs; }

  void accept() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket s) {
      if (ec) return;
      std::make_shared<WsClient>(std::move(s), *this)->start();
      accept();
    });
  }

  void broadcast(const std::string& text) {
    for (const auto& c : clients) c->send(text);
  }

  void on_message(const std::shared_ptr<WsClient>& from, const std::string& text) {
    try {
      session.apply_ui_event(decode_ui_event(text), now_ms());
    } catch (const Error& e) {
      ordered_json j;
      j["type"] = "error";
      j["error"] = error_name(e);
      j["message"] = e.what();
      from->send(j.dump());
    }
  }

  // External backend.
  void connect_backend() {
    for (auto* sock : {&command_socket, &telemetry_socket}) {
      const Endpoint& ep = sock == &command_socket ? options.command_addr : options.telemetry_addr;
      *sock = std::make_unique<tcp::socket>(ioc);
      beast::error_code ec;
      (*sock)->connect(detail::resolve(ioc, ep), ec);
      if (ec) throw BackendUnavailable(fmt::format("cannot reach backend at {}: {}", ep.str(), ec.message()));
    }
    read_telemetry();
  }

  void send_command(std::string frame) {
    if (!command_socket) return;
    command_queue.push_back(std::move(frame));
    if (command_queue.size() == 1) write_command();
  }

  void write_command() {
    net::async_write(*command_socket, net::buffer(command_queue.front()), [this](beast::error_code ec, std::size_t) {
      if (ec) {
        log("backend command link lost: " + ec.message());
        command_socket.reset();
        command_queue.clear();
        return;
      }
      command_queue.pop_front();
      if (!command_queue.empty()) write_command();
    });
  }

  void read_telemetry() {
    telemetry_socket->async_read_some(net::buffer(read_buf), [this](beast::error_code ec, std::size_t n) {
      if (ec) {
        log("backend telemetry link lost: " + ec.message());
        telemetry_socket.reset();
        return;
      }
      splitter.feed(std::string_view(read_buf.data(), n));
      while (auto frame = splitter.next()) {
        try {
          ingest(decode_telemetry(*frame));
        } catch (const Error& e) {
          log(std::string("rejected telemetry frame: ") + e.what());
        }
      }
      read_telemetry();
    });
  }

  void ingest(const TelemetrySample& s) {
    ++samples_this_second;
    session.on_telemetry(s, Channel::Reference);
    session.on_telemetry(s, Channel::Executed);
  }

  void on_tick() {
    const std::int64_t t = now_ms();
    if (t % kCommandPeriodMs == 0) {
      const std::string frame = encode_command(session.tick_command(t));
      if (builtin) {
        builtin->on_command_frame(frame);
      } else {
        send_command(frame);
      }
    }
    if (builtin && t % kTelemetryPeriodMs == 0) {
      ingest(decode_telemetry(builtin->sample_frame()));
      builtin->advance();
    }
    if (!builtin && session.state().status == SessionStatus::Finishing) {
      if (const auto end = session.recipe_end_ms(); end && t >= *end + kExternalDrainMs) session.finish_pending();
    }
    if (t % 1000 == 0) {
      fps = static_cast<double>(samples_this_second);
      samples_this_second = 0;
    }

    auto finished = session.take_finished();
    report_recipe_progress(!finished.empty());
    for (auto& rec : finished) save(std::move(rec));

    if (tick % options.state_period_ticks == 0) broadcast(session.state_record(fps).dump());
    ++tick;
  }

  void report_recipe_progress(bool finished_now) {
    const auto status = session.state().status;
    const auto seg = session.active_segment();
    const bool running = status == SessionStatus::RecipeRunning || status == SessionStatus::Finishing;
    ordered_json j;
    j["type"] = "recipe_status";
    if (running && seg && seg != last_segment) {
      j["status"] = "running";
      j["segment"] = *seg;
      broadcast(j.dump());
      last_segment = seg;
    } else if (was_running && !running) {
      j["status"] = finished_now ? "finished" : "aborted";
      j["segment"] = nullptr;
      broadcast(j.dump());
      last_segment.reset();
    }
    was_running = running;
  }

  void save(Recording rec) {
    try {
      SessionPackage pkg = make_package(registry, banks, rec, AnnotationSet{}, utc_now_iso());
      std::vector<SegmentIntent> intents;
      for (const auto& s : pkg.segments) intents.push_back(s.intent);
      const std::uint64_t seed = SplitMix64::derive(options.seed, {saved_count++}).next();
      pkg.annotations = annotator.render_trajectory(intents, seed);
      pkg.manifest.seed = seed;
      const auto dir = options.out_dir / rec.session_id;
      write_package(pkg, dir);
      log(fmt::format("saved {} ({} segments)", dir.string(), pkg.segments.size()));
      ordered_json j;
      j["type"] = "session_saved";
      j["session_id"] = rec.session_id;
      j["path"] = dir.string();
      broadcast(j.dump());
    } catch (const Error& e) {
      log(fmt::format("session {} not saved: {}", rec.session_id, e.what()));
    }
  }

  void schedule() {
    const auto deadline = epoch + std::chrono::milliseconds((tick + 1) * kTickMs);
    timer.expires_at(deadline);
    timer.async_wait([this](beast::error_code ec) {
      if (ec) return;
      on_tick();
      schedule();
    });
  }

  const Registry& registry;
  const Banks& banks;
  ServeOptions options;
  net::io_context ioc;
  tcp::acceptor acceptor;
  net::steady_timer timer;
  net::signal_set signals;
  Session session;
  Annotator annotator;
  std::optional<ReferenceBackend> builtin;
  std::unique_ptr<tcp::socket> command_socket;
  std::unique_ptr<tcp::socket> telemetry_socket;
  std::deque<std::string> command_queue;
  std::array<char, 8192> read_buf{};
  FrameSplitter splitter;
  std::set<std::shared_ptr<WsClient>> clients;
  std::string registry_json;
  std::chrono::steady_clock::time_point epoch;
  std::int64_t tick = 0;
  double fps = 0.0;
  std::uint64_t samples_this_second = 0;
  std::uint64_t saved_count = 0;
  std::optional<int> last_segment;
  bool was_running = false;
};

void WsClient::start() {
  http::async_read(beast::get_lowest_layer(ws_), buffer_, request_,
                   [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_request(ec); });
}

void WsClient::on_request(beast::error_code ec) {
  if (ec) return;
  if (!websocket::is_upgrade(request_)) {
    plain_ = std::make_shared<http::response<http::string_body>>(http::status::ok, request_.version());
    plain_->set(http::field::content_type, "application/json");
    plain_->body() = request_.target() == "/registry"
                         ? owner_.registry_json
                         : owner_.session.state_record(owner_.fps).dump();
    plain_->keep_alive(false);
    plain_->prepare_payload();
    http::async_write(beast::get_lowest_layer(ws_), *plain_,
                      [self = shared_from_this()](beast::error_code, std::size_t) { self->close(); });
    return;
  }
  ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
  ws_.async_accept(request_, [self = shared_from_this()](beast::error_code ec) {
    if (ec) return;
    self->open_ = true;
    self->owner_.clients.insert(self);
    self->send(self->owner_.registry_json);
    self->read();
  });
}

void WsClient::read() {
  buffer_.clear();
  ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) {
      self->open_ = false;
      self->owner_.clients.erase(self);
      return;
    }
    self->owner_.on_message(self, beast::buffers_to_string(self->buffer_.data()));
    self->read();
  });
}

void WsClient::send(std::string text) {
  if (!open_) return;
  if (queue_.size() >= kMaxClientQueue) queue_.pop_back();
  queue_.push_back(std::move(text));
  if (queue_.size() == 1) write_next();
}

void WsClient::write_next() {
  ws_.text(true);
  ws_.async_write(net::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) {
      self->open_ = false;
      self->queue_.clear();
      self->owner_.clients.erase(self);
      return;
    }
    self->queue_.pop_front();
    if (!self->queue_.empty()) self->write_next();
  });
}

Service::Service(const Registry& registry, const Banks& banks, ServeOptions options)
    : impl_(std::make_unique<Impl>(registry, banks, std::move(options))) {}

Service::~Service() {
  if (impl_) {
    for (const auto& c : impl_->clients) c->close();
    impl_->clients.clear();
  }
}

void Service::start() {
  Impl& s = *impl_;
  s.registry_json = registry_record(s.registry).dump();
  detail::listen_on(s.ioc, s.acceptor, s.options.listen);
  if (s.options.backend == BackendKind::External) {
    s.connect_backend();
  } else {
    s.builtin.emplace(s.registry, s.options.limits, s.session.state().ui_mode_index);
  }
  s.accept();
  s.epoch = std::chrono::steady_clock::now();
  s.schedule();
  if (s.options.handle_signals) {
    s.signals.add(SIGINT);
    s.signals.add(SIGTERM);
    s.signals.async_wait([this](beast::error_code ec, int) {
      if (!ec) impl_->ioc.stop();
    });
  }
}

std::uint16_t Service::port() const { return impl_->acceptor.local_endpoint().port(); }

void Service::run() { impl_->ioc.run(); }

void Service::stop() { impl_->ioc.stop(); }

}  // namespace mocomp
