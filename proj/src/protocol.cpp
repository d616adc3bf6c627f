#include "mocomp/protocol.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <system_error>

#include <fmt/format.h>
#include <json.hpp>

#include "mocomp/errors.hpp"

namespace mocomp {

using ojson = nlohmann::ordered_json;

namespace {

constexpr std::array<std::string_view, 6> kCommandFields = {"t", "mode", "move", "face", "speed", "height"};
constexpr std::array<std::string_view, 8> kTelemetryFields = {"t",   "mode", "pos",   "heading",
                                                              "vel", "h",    "phase", "joints"};

void append_double(std::string& out, double v) { out += format_double(v); }

void append_vec(std::string& out, std::initializer_list<double> vs) {
  out += '[';
  bool first = true;
  for (double v : vs) {
    if (!first) out += ',';
    first = false;
    append_double(out, v);
  }
  out += ']';
}

bool is_unit(Vec2 v) { return std::abs(norm(v) - 1.0) <= kUnitTolerance; }
bool is_zero_or_unit(Vec2 v) { return norm(v) <= kUnitTolerance || is_unit(v); }
bool finite(Vec2 v) { return std::isfinite(v.x) && std::isfinite(v.y); }

// Parses a single frame into an ordered object with exactly `fields` in order.
ojson parse_record(std::string_view frame, std::span<const std::string_view> fields) {
  if (frame.empty() || frame.back() != '\n') throw MalformedFrame("frame is not newline terminated");
  const std::string_view body = frame.substr(0, frame.size() - 1);
  if (body.find('\n') != std::string_view::npos) throw MalformedFrame("frame contains an embedded newline");
  ojson j = ojson::parse(body, nullptr, false);
  if (j.is_discarded()) throw MalformedFrame("frame is not valid JSON");
  if (!j.is_object()) throw MalformedFrame("frame is not an object");
  if (j.size() != fields.size()) throw MalformedFrame(fmt::format("expected {} fields, got {}", fields.size(), j.size()));
  std::size_t i = 0;
  for (auto it = j.begin(); it != j.end(); ++it, ++i) {
    if (it.key() != fields[i]) {
      throw MalformedFrame(fmt::format("field {} is '{}', expected '{}'", i, it.key(), fields[i]));
    }
  }
  return j;
}

double get_double(const ojson& j, std::string_view key) {
  const auto& v = j.at(std::string(key));
  if (!v.is_number()) throw MalformedFrame(fmt::format("'{}' is not a number", key));
  return v.get<double>();
}

std::int64_t get_int(const ojson& j, std::string_view key) {
  const auto& v = j.at(std::string(key));
  if (!v.is_number_integer()) throw MalformedFrame(fmt::format("'{}' is not an integer", key));
  if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
    throw MalformedFrame(fmt::format("'{}' does not fit a signed 64-bit integer", key));
  }
  return v.get<std::int64_t>();
}

int get_mode(const ojson& j) {
  const std::int64_t m = get_int(j, "mode");
  if (m < std::numeric_limits<int>::min() || m > std::numeric_limits<int>::max()) {
    return -1;  // rejected by the semantic check
  }
  return static_cast<int>(m);
}

std::vector<double> get_array(const ojson& j, std::string_view key, std::optional<std::size_t> size) {
  const auto& v = j.at(std::string(key));
  if (!v.is_array()) throw MalformedFrame(fmt::format("'{}' is not an array", key));
  if (size && v.size() != *size) throw MalformedFrame(fmt::format("'{}' must have {} elements", key, *size));
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_number()) throw MalformedFrame(fmt::format("'{}' holds a non-number", key));
    out.push_back(e.get<double>());
  }
  return out;
}

}  // namespace

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw std::runtime_error("float formatting failed");
  std::string s(buf.data(), end);
  if (std::isfinite(v) && s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

void check_command(const MetaCommand& cmd) {
  if (cmd.timestamp_ms < 0) throw InvalidCommand("timestamp must be non-negative");
  if (cmd.mode_index < 0 || cmd.mode_index >= kModeCount) {
    throw InvalidCommand(fmt::format("mode index {} outside [0, {}]", cmd.mode_index, kModeCount - 1));
  }
  if (!finite(cmd.movement_dir) || !is_zero_or_unit(cmd.movement_dir)) {
    throw InvalidCommand("movement direction must be zero or unit length");
  }
  if (!finite(cmd.facing_dir) || !is_unit(cmd.facing_dir)) throw InvalidCommand("facing direction must be unit length");
  if (!std::isfinite(cmd.speed) || cmd.speed < 0.0) throw InvalidCommand("speed must be finite and non-negative");
  if (!std::isfinite(cmd.pelvis_height) || cmd.pelvis_height <= 0.0) {
    throw InvalidCommand("pelvis height must be finite and positive");
  }
}

void check_sample(const TelemetrySample& s) {
  if (s.timestamp_ms < 0) throw InvalidSample("timestamp must be non-negative");
  if (s.mode_index < 0 || s.mode_index >= kModeCount) throw InvalidSample("mode index out of range");
  if (!std::isfinite(s.base_pos.x) || !std::isfinite(s.base_pos.y) || !std::isfinite(s.base_pos.z)) {
    throw InvalidSample("base position must be finite");
  }
  constexpr double kPi = std::numbers::pi;
  if (!(s.heading_rad > -kPi && s.heading_rad <= kPi)) throw InvalidSample("heading outside (-pi, pi]");
  if (!finite(s.base_vel)) throw InvalidSample("base velocity must be finite");
  if (!std::isfinite(s.pelvis_height)) throw InvalidSample("pelvis height must be finite");
  if (!(s.gait_phase >= 0.0 && s.gait_phase < 1.0)) throw InvalidSample("gait phase outside [0, 1)");
  for (double q : s.joints) {
    if (!std::isfinite(q)) throw InvalidSample("joint positions must be finite");
  }
}

std::string encode_command(const MetaCommand& cmd) {
  check_command(cmd);
  std::string out;
  out.reserve(128);
  out += "{\"t\":";
  out += std::to_string(cmd.timestamp_ms);
  out += ",\"mode\":";
  out += std::to_string(cmd.mode_index);
  out += ",\"move\":";
  append_vec(out, {cmd.movement_dir.x, cmd.movement_dir.y});
  out += ",\"face\":";
  append_vec(out, {cmd.facing_dir.x, cmd.facing_dir.y});
  out += ",\"speed\":";
  append_double(out, cmd.speed);
  out += ",\"height\":";
  append_double(out, cmd.pelvis_height);
  out += "}\n";
  return out;
}

MetaCommand decode_command(std::string_view frame) {
  const ojson j = parse_record(frame, kCommandFields);
  MetaCommand cmd;
  cmd.timestamp_ms = get_int(j, "t");
  cmd.mode_index = get_mode(j);
  const auto move = get_array(j, "move", 2);
  const auto face = get_array(j, "face", 2);
  cmd.movement_dir = {move[0], move[1]};
  cmd.facing_dir = {face[0], face[1]};
  cmd.speed = get_double(j, "speed");
  cmd.pelvis_height = get_double(j, "height");
  check_command(cmd);
  return cmd;
}

std::string encode_telemetry(const TelemetrySample& s) {
  check_sample(s);
  std::string out;
  out.reserve(160 + 24 * s.joints.size());
  out += "{\"t\":";
  out += std::to_string(s.timestamp_ms);
  out += ",\"mode\":";
  out += std::to_string(s.mode_index);
  out += ",\"pos\":";
  append_vec(out, {s.base_pos.x, s.base_pos.y, s.base_pos.z});
  out += ",\"heading\":";
  append_double(out, s.heading_rad);
  out += ",\"vel\":";
  append_vec(out, {s.base_vel.x, s.base_vel.y});
  out += ",\"h\":";
  append_double(out, s.pelvis_height);
  out += ",\"phase\":";
  append_double(out, s.gait_phase);
  out += ",\"joints\":[";
  for (std::size_t i = 0; i < s.joints.size(); ++i) {
    if (i) out += ',';
    append_double(out, s.joints[i]);
  }
  out += "]}\n";
  return out;
}

TelemetrySample decode_telemetry(std::string_view frame) {
  const ojson j = parse_record(frame, kTelemetryFields);
  TelemetrySample s;
  s.timestamp_ms = get_int(j, "t");
  s.mode_index = get_mode(j);
  const auto pos = get_array(j, "pos", 3);
  s.base_pos = {pos[0], pos[1], pos[2]};
  s.heading_rad = get_double(j, "heading");
  const auto vel = get_array(j, "vel", 2);
  s.base_vel = {vel[0], vel[1]};
  s.pelvis_height = get_double(j, "h");
  s.gait_phase = get_double(j, "phase");
  s.joints = get_array(j, "joints", std::nullopt);
  check_sample(s);
  return s;
}

void FrameSplitter::feed(std::string_view bytes) {
  if (read_pos_ > 0 && read_pos_ == buffer_.size()) {
    buffer_.clear();
    read_pos_ = 0;
  }
  buffer_.append(bytes);
}

std::optional<std::string> FrameSplitter::next() {
  const auto nl = buffer_.find('\n', read_pos_);
  if (nl == std::string::npos) {
    if (read_pos_ > 0) {
      buffer_.erase(0, read_pos_);
      read_pos_ = 0;
    }
    return std::nullopt;
  }
  std::string frame = buffer_.substr(read_pos_, nl + 1 - read_pos_);
  read_pos_ = nl + 1;
  return frame;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::array<std::pair<Key, std::string_view>, 9> kKeyNames = {{
    {Key::W, "W"},
    {Key::A, "A"},
    {Key::S, "S"},
    {Key::D, "D"},
    {Key::Q, "Q"},
    {Key::E, "E"},
    {Key::Comma, "comma"},
    {Key::Period, "period"},
    {Key::R, "R"},
}};

template <class>
inline constexpr bool kAlwaysFalse = false;

}  // namespace

std::string_view key_name(Key k) {
  for (const auto& [key, name] : kKeyNames) {
    if (key == k) return name;
  }
  return "?";
}

std::optional<Key> parse_key(std::string_view name) {
  for (const auto& [key, n] : kKeyNames) {
    if (n == name) return key;
  }
  if (name == ",") return Key::Comma;
  if (name == ".") return Key::Period;
  return std::nullopt;
}

std::string encode_ui_event(const UiEvent& ev) {
  ojson j;
  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, KeyDown>) {
          j["type"] = "key_down";
          j["key"] = key_name(e.key);
        } else if constexpr (std::is_same_v<T, KeyUp>) {
          j["type"] = "key_up";
          j["key"] = key_name(e.key);
        } else if constexpr (std::is_same_v<T, SetMode>) {
          j["type"] = "set_mode";
          j["mode"] = e.mode_index;
        } else if constexpr (std::is_same_v<T, SetSpeed>) {
          j["type"] = "set_speed";
          j["value"] = e.value;
        } else if constexpr (std::is_same_v<T, SetHeight>) {
          j["type"] = "set_height";
          j["value"] = e.value;
        } else if constexpr (std::is_same_v<T, DispatchRecipe>) {
          j["type"] = "dispatch_recipe";
          j["recipe"] = recipe_to_json(e.recipe);
        } else if constexpr (std::is_same_v<T, Halt>) {
          j["type"] = "halt";
        } else {
          static_assert(kAlwaysFalse<T>);
        }
      },
      ev);
  return j.dump();
}

UiEvent decode_ui_event(std::string_view text) {
  const nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw InvalidEvent("event is not a JSON object");
  if (!j.contains("type") || !j["type"].is_string()) throw InvalidEvent("event has no type");
  const auto type = j["type"].get<std::string>();

  auto key = [&]() {
    if (!j.contains("key") || !j["key"].is_string()) throw InvalidEvent(type + " needs a key");
    const auto k = parse_key(j["key"].get<std::string>());
    if (!k) throw InvalidEvent("unbound key '" + j["key"].get<std::string>() + "'");
    return *k;
  };
  auto number = [&](const char* field) {
    if (!j.contains(field) || !j[field].is_number()) throw InvalidEvent(type + " needs numeric '" + field + "'");
    const double v = j[field].get<double>();
    if (!std::isfinite(v)) throw InvalidEvent(type + " value must be finite");
    return v;
  };

  if (type == "key_down") return KeyDown{key()};
  if (type == "key_up") return KeyUp{key()};
  if (type == "set_mode") {
    if (!j.contains("mode") || !j["mode"].is_number_integer()) throw InvalidEvent("set_mode needs an integer mode");
    return SetMode{j["mode"].get<int>()};
  }
  if (type == "set_speed") return SetSpeed{number("value")};
  if (type == "set_height") return SetHeight{number("value")};
  if (type == "halt") return Halt{};
  if (type == "dispatch_recipe") {
    if (!j.contains("recipe")) throw InvalidEvent("dispatch_recipe needs a recipe");
    try {
      return DispatchRecipe{recipe_from_json(j["recipe"])};
    } catch (const InvalidRecipe& e) {
      throw InvalidEvent(std::string("bad recipe: ") + e.what());
    }
  }
  throw InvalidEvent("unknown event type '" + type + "'");
}

}  // namespace mocomp
