#pragma once

#include <string>
#include <string_view>

#include "mocomp/planner.hpp"
#include "mocomp/registry.hpp"

namespace mocomp {

// The reference kinematic backend as seen over the wire: command frames in,
// telemetry frames out. Holds the last command until a newer one arrives.
class ReferenceBackend {
 public:
  ReferenceBackend(const Registry& registry, PlannerLimits limits, int initial_mode = 1);

  // Decodes and clamps a command frame. Throws MalformedFrame / InvalidCommand.
  void on_command_frame(std::string_view frame);
  void on_command(const MetaCommand& cmd);

  // Telemetry frame for the current state (kinematic reference channel).
  std::string sample_frame() const;
  // The dynamic channel. Without a physics model it mirrors the reference.
  std::string executed_frame() const { return sample_frame(); }

  // One fixed step with the latest command.
  void advance();

  const PlannerState& state() const { return state_; }
  void reset(int mode, std::int64_t time_ms = 0);
  // Moves the clock to the telemetry tick at or before `time_ms`.
  void resync(std::int64_t time_ms);

 private:
  const Registry* registry_;
  PlannerLimits limits_;
  PlannerState state_;
  MetaCommand command_;
};

}  // namespace mocomp
