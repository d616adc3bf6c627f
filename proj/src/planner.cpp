#include "mocomp/planner.hpp"

#include <algorithm>
#include <cmath>

namespace mocomp {

namespace {

// Moves `from` toward `to` by at most `max_step`.
double approach(double from, double to, double max_step) {
  const double d = to - from;
  if (std::abs(d) <= max_step) return to;
  return from + std::copysign(max_step, d);
}

Vec2 approach(Vec2 from, Vec2 to, double max_step) {
  const Vec2 d = to - from;
  const double len = norm(d);
  if (len <= max_step) return to;
  return from + d * (max_step / len);
}

}  // namespace

PlannerState initial_state(const Registry& registry, int mode, std::int64_t time_ms) {
  const ModeSpec& m = registry.at(mode);
  PlannerState s;
  s.time_ms = time_ms;
  s.active_mode = mode;
  s.pelvis_height = m.default_height;
  s.base_pos = {0.0, 0.0, m.default_height};
  return s;
}

MetaCommand clamp_command(const Registry& registry, const MetaCommand& cmd) {
  const ModeSpec& m = registry.at(cmd.mode_index);
  MetaCommand out = cmd;
  out.speed = m.supports_speed ? m.speed_range->clamp(cmd.speed) : m.default_speed;
  out.pelvis_height = m.supports_height ? m.height_range->clamp(cmd.pelvis_height) : m.default_height;
  if (!m.supports_heading) out.movement_dir = {0.0, 0.0};
  return out;
}

TelemetrySample sample_of(const PlannerState& state) {
  TelemetrySample s;
  s.timestamp_ms = state.time_ms;
  s.mode_index = state.active_mode;
  s.base_pos = state.base_pos;
  s.heading_rad = state.heading_rad;
  s.base_vel = rotate(state.body_vel, state.heading_rad);
  s.pelvis_height = state.pelvis_height;
  s.gait_phase = state.gait_phase;
  return s;
}

StepResult step(const Registry& registry, const PlannerLimits& limits, const PlannerState& state,
                const MetaCommand& cmd) {
  const ModeSpec& mode = registry.at(cmd.mode_index);
  const double dt = limits.dt;
  PlannerState s = state;

  if (cmd.mode_index != s.active_mode) {
    s.active_mode = cmd.mode_index;
    s.blend_remaining_s = std::max(0.0, limits.blend_time);
  }

  // Modes without heading support hold the current heading.
  if (mode.supports_heading) {
    const double error = wrap_angle(angle_of(cmd.facing_dir) - s.heading_rad);
    const double turn = std::clamp(error, -limits.max_turn_rate * dt, limits.max_turn_rate * dt);
    s.heading_rad = wrap_angle(s.heading_rad + turn);
  }

  // Acceleration ramps back in over the blend window after a mode switch.
  double accel = limits.max_accel;
  if (s.blend_remaining_s > 0.0) {
    s.blend_remaining_s -= dt;
    if (s.blend_remaining_s < 1e-12) s.blend_remaining_s = 0.0;
    accel *= 1.0 - s.blend_remaining_s / limits.blend_time;
  }
  const Vec2 target_vel = cmd.movement_dir * cmd.speed;
  s.body_vel = approach(s.body_vel, target_vel, accel * dt);

  const Vec2 world_vel = rotate(s.body_vel, s.heading_rad);
  s.pelvis_height = approach(s.pelvis_height, cmd.pelvis_height, limits.max_height_rate * dt);
  s.base_pos.x += world_vel.x * dt;
  s.base_pos.y += world_vel.y * dt;
  s.base_pos.z = s.pelvis_height;

  if (mode.default_speed > 0.0) {
    double phase = s.gait_phase + mode.gait_frequency * (s.current_speed() / mode.default_speed) * dt;
    phase -= std::floor(phase);
    if (phase >= 1.0) phase = 0.0;
    s.gait_phase = phase;
  }

  s.time_ms += static_cast<std::int64_t>(std::llround(dt * 1000.0));
  return {s, sample_of(s)};
}

}  // namespace mocomp
