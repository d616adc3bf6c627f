#pragma once

#include <cstdint>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "mocomp/planner.hpp"
#include "mocomp/protocol.hpp"
#include "mocomp/recipe.hpp"
#include "mocomp/registry.hpp"

namespace mocomp {

enum class SessionStatus { Idle, Keyboard, RecipeRunning, Finishing };
std::string_view status_name(SessionStatus s);

enum class Channel { Reference, Executed };

inline constexpr double kSnapQuantumRad = std::numbers::pi / 6.0;  // 30 degrees

// Everything captured for one session; the dataset module packages it.
struct Recording {
  std::string session_id;
  Recipe recipe;  // synthesized from the segments for keyboard sessions
  std::string backend_name = "reference-kinematic";
  std::size_t joints_dim = 0;
  std::vector<MetaCommand> commands;  // effective (post-clamp) stream
  std::vector<TelemetrySample> reference;
  std::vector<TelemetrySample> executed;
  std::vector<SegmentTag> segments;
};

struct SessionOptions {
  PlannerLimits limits;
  bool record_keyboard = true;
  std::string backend_name = "reference-kinematic";
  std::size_t joints_dim = 0;
  std::string session_prefix = "session";
};

struct SessionState {
  SessionStatus status = SessionStatus::Idle;
  std::set<Key> held_keys;
  // Absolute snap target, always a whole number of snap quanta.
  int heading_snaps = 0;
  // Continuous rotation accumulated from A/D and recipe turn schedules.
  double turn_offset_rad = 0.0;
  int ui_mode_index = 1;
  double ui_speed = 1.0;
  double ui_height = 0.74;
  bool recording = false;

  double heading_target_rad() const { return heading_snaps * kSnapQuantumRad; }
};

// The bridge coordinator. Owns the session state, synthesizes the 20 Hz
// command stream from UI events or the active recipe, ingests telemetry and
// records sessions. Clock agnostic: callers pass session time in ms.
class Session {
 public:
  Session(const Registry& registry, SessionOptions options = {});

  const SessionState& state() const { return state_; }
  const Registry& registry() const { return *registry_; }

  // Throws IgnoredDuringRecipe for movement keys or a second dispatch while a
  // recipe runs, InvalidRecipe for a bad dispatched recipe. A dispatch during
  // keyboard control closes the keyboard recording first.
  void apply_ui_event(const UiEvent& ev, std::int64_t now_ms = 0);

  // Validates and starts a recipe at the first command tick at or after
  // `start_ms`. Throws InvalidRecipe.
  void start_recipe(const Recipe& recipe, std::int64_t start_ms, std::string session_id = {});

  // Called once per command period. Returns the effective command.
  MetaCommand tick_command(std::int64_t now_ms);

  void on_telemetry(const TelemetrySample& sample, Channel channel = Channel::Reference);

  // Finalizes a recipe waiting for its last telemetry.
  void finish_pending();

  // Completed recordings, oldest first; ownership moves to the caller.
  std::vector<Recording> take_finished();

  std::uint64_t dropped(Channel c) const { return dropped_[static_cast<int>(c)]; }
  const std::optional<TelemetrySample>& latest() const { return latest_; }
  // Active recipe segment, if any.
  std::optional<int> active_segment() const;
  std::optional<std::int64_t> recipe_end_ms() const;

  // Frontend status record.
  nlohmann::ordered_json state_record(double fps) const;

 private:
  struct RecipeRun {
    Recipe recipe;
    std::vector<int> modes;
    std::vector<std::int64_t> bounds;
    std::vector<std::int64_t> first_tick;
    std::vector<int> ticks;
    int current = -1;
    double base_offset = 0.0;
  };

  MetaCommand keyboard_command(std::int64_t now_ms);
  MetaCommand recipe_command(std::int64_t now_ms);
  MetaCommand halt_command(std::int64_t now_ms) const;
  void begin_recording(std::int64_t start_ms, std::string session_id, Recipe recipe);
  void finalize_recording(std::int64_t end_ms);
  void abort_recipe();
  void enter_idle();
  std::string next_session_id(std::string_view kind);

  const Registry* registry_;
  SessionOptions options_;
  SessionState state_;
  std::optional<RecipeRun> run_;
  std::optional<Recording> active_;
  bool active_is_keyboard_ = false;
  std::optional<std::int64_t> pending_end_ms_;
  std::vector<Recording> finished_;
  std::optional<TelemetrySample> latest_;
  std::optional<MetaCommand> last_command_;
  std::optional<std::int64_t> last_ts_[2];
  std::uint64_t dropped_[2] = {0, 0};
  std::uint64_t session_counter_ = 0;
  // Keyboard segmentation: a new segment starts whenever (mode, movement) changes.
  std::optional<std::pair<int, Movement>> kb_key_;
  bool halt_requested_ = false;
};

}  // namespace mocomp
