#pragma once

// Messages exchanged between the frontend, the bridge and a planner backend.
//
// Command and telemetry channels carry newline-delimited records, one JSON
// object per line with a fixed field order:
//
//   {"t":0,"mode":1,"move":[1.0,0.0],"face":[1.0,0.0],"speed":1.0,"height":0.74}
//   {"t":0,"mode":1,"pos":[0.0,0.0,0.74],"heading":0.0,"vel":[0.0,0.0],"h":0.74,"phase":0.0,"joints":[]}
//
// Floats are written in their shortest round-trip decimal form and always carry
// a '.' or exponent, so encoding is canonical and decode(encode(v)) is
// bit-exact. The frontend channel carries UiEvent and state records as
// WebSocket text frames discriminated by a "type" field.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mocomp/geometry.hpp"
#include "mocomp/recipe.hpp"

namespace mocomp {

inline constexpr int kModeCount = 25;
inline constexpr double kUnitTolerance = 1e-6;

struct MetaCommand {
  std::int64_t timestamp_ms = 0;
  int mode_index = 0;
  Vec2 movement_dir;          // body frame, x forward, y left
  Vec2 facing_dir{1.0, 0.0};  // world frame
  double speed = 0.0;
  double pelvis_height = 0.74;

  friend bool operator==(const MetaCommand&, const MetaCommand&) = default;
};

struct TelemetrySample {
  std::int64_t timestamp_ms = 0;
  int mode_index = 0;
  Vec3 base_pos;
  double heading_rad = 0.0;
  Vec2 base_vel;
  double pelvis_height = 0.74;
  double gait_phase = 0.0;
  std::vector<double> joints;

  friend bool operator==(const TelemetrySample&, const TelemetrySample&) = default;
};

// Throws InvalidCommand / InvalidSample describing the first violated invariant.
void check_command(const MetaCommand& cmd);
void check_sample(const TelemetrySample& sample);

// One frame per call, terminated by '\n'.
std::string encode_command(const MetaCommand& cmd);
MetaCommand decode_command(std::string_view frame);
std::string encode_telemetry(const TelemetrySample& sample);
TelemetrySample decode_telemetry(std::string_view frame);

// Splits a byte stream into complete frames; partial trailing data is kept
// until the rest arrives.
class FrameSplitter {
 public:
  void feed(std::string_view bytes);
  std::optional<std::string> next();
  bool has_partial() const { return read_pos_ < buffer_.size(); }

 private:
  std::string buffer_;
  std::size_t read_pos_ = 0;
};

// Shortest round-trip decimal form, always containing '.' or 'e'.
std::string format_double(double v);

// ---------------------------------------------------------------------------
// Frontend channel

enum class Key { W, A, S, D, Q, E, Comma, Period, R };

std::string_view key_name(Key k);
std::optional<Key> parse_key(std::string_view name);

struct KeyDown { Key key; };
struct KeyUp { Key key; };
struct SetMode { int mode_index; };
struct SetSpeed { double value; };
struct SetHeight { double value; };
struct DispatchRecipe { Recipe recipe; };
struct Halt {};

using UiEvent = std::variant<KeyDown, KeyUp, SetMode, SetSpeed, SetHeight, DispatchRecipe, Halt>;

std::string encode_ui_event(const UiEvent& ev);
// Throws InvalidEvent on unknown types, bad payloads or unbound key codes.
UiEvent decode_ui_event(std::string_view text);

}  // namespace mocomp
