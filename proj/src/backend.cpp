#include "mocomp/backend.hpp"

#include "mocomp/protocol.hpp"

namespace mocomp {

ReferenceBackend::ReferenceBackend(const Registry& registry, PlannerLimits limits, int initial_mode)
    : registry_(&registry), limits_(limits) {
  reset(initial_mode);
}

void ReferenceBackend::reset(int mode, std::int64_t time_ms) {
  state_ = initial_state(*registry_, mode, time_ms);
  const ModeSpec& m = registry_->at(mode);
  command_ = MetaCommand{};
  command_.timestamp_ms = time_ms;
  command_.mode_index = mode;
  command_.facing_dir = unit_from_angle(state_.heading_rad);
  command_.speed = m.default_speed;
  command_.pelvis_height = m.default_height;
  command_ = clamp_command(*registry_, command_);
}

void ReferenceBackend::on_command_frame(std::string_view frame) { on_command(decode_command(frame)); }

void ReferenceBackend::on_command(const MetaCommand& cmd) { command_ = clamp_command(*registry_, cmd); }

std::string ReferenceBackend::sample_frame() const { return encode_telemetry(sample_of(state_)); }

void ReferenceBackend::resync(std::int64_t time_ms) {
  state_.time_ms = time_ms - ((time_ms % kTelemetryPeriodMs) + kTelemetryPeriodMs) % kTelemetryPeriodMs;
}

void ReferenceBackend::advance() { state_ = step(*registry_, limits_, state_, command_).state; }

}  // namespace mocomp
