#pragma once

#include <cstdint>

#include "mocomp/geometry.hpp"
#include "mocomp/protocol.hpp"
#include "mocomp/registry.hpp"

namespace mocomp {

inline constexpr int kTelemetryHz = 50;
inline constexpr int kCommandHz = 20;
inline constexpr std::int64_t kTelemetryPeriodMs = 1000 / kTelemetryHz;
inline constexpr std::int64_t kCommandPeriodMs = 1000 / kCommandHz;

struct PlannerLimits {
  double max_turn_rate = 1.5;      // rad/s
  double max_accel = 2.0;          // m/s^2
  double max_height_rate = 0.5;    // m/s
  double blend_time = 0.5;         // s
  double dt = 1.0 / kTelemetryHz;  // s
};

struct PlannerState {
  std::int64_t time_ms = 0;
  Vec3 base_pos;  // z mirrors pelvis_height
  double heading_rad = 0.0;
  double pelvis_height = 0.74;
  Vec2 body_vel;  // realized velocity, body frame
  double gait_phase = 0.0;
  int active_mode = 0;
  double blend_remaining_s = 0.0;

  double current_speed() const { return norm(body_vel); }
  friend bool operator==(const PlannerState&, const PlannerState&) = default;
};

// Standing start in `mode` at its default height.
PlannerState initial_state(const Registry& registry, int mode, std::int64_t time_ms = 0);

// Applies the mode's capability flags and ranges to a command. The result is
// what the integrator consumes and what gets archived. Throws UnknownMode.
MetaCommand clamp_command(const Registry& registry, const MetaCommand& cmd);

// Snapshot of a state as a telemetry record (joints dimension 0).
TelemetrySample sample_of(const PlannerState& state);

struct StepResult {
  PlannerState state;
  TelemetrySample sample;  // sample_of(state)
};

// Advances one fixed step. The new mode is adopted with position, heading and
// height carried over; velocity and height are rate limited so every switch is
// continuous.
StepResult step(const Registry& registry, const PlannerLimits& limits, const PlannerState& state,
                  const MetaCommand& effective_cmd);

}  // namespace mocomp
