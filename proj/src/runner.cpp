#include "mocomp/runner.hpp"

#include "mocomp/backend.hpp"
#include "mocomp/errors.hpp"

namespace mocomp {

namespace {
constexpr std::int64_t kBaseStepMs = 10;
constexpr std::int64_t kDrainLimitMs = 1000;
}  // namespace

Recording execute_recipe(const Registry& registry, const Recipe& recipe, const RunOptions& options) {
  validate_recipe(registry, recipe);
  SessionOptions so;
  so.limits = options.limits;
  so.record_keyboard = false;
  Session session(registry, so);
  ReferenceBackend backend(registry, options.limits, resolve_mode(registry, recipe.segments.front().mode));

  session.start_recipe(recipe, 0, options.session_id);
  const std::int64_t end = *session.recipe_end_ms();

  for (std::int64_t t = 0; t <= end + kDrainLimitMs; t += kBaseStepMs) {
    if (t % kCommandPeriodMs == 0) backend.on_command_frame(encode_command(session.tick_command(t)));
    if (t % kTelemetryPeriodMs == 0) {
      session.on_telemetry(decode_telemetry(backend.sample_frame()), Channel::Reference);
      session.on_telemetry(decode_telemetry(backend.executed_frame()), Channel::Executed);
      backend.advance();
    }
    auto done = session.take_finished();
    if (!done.empty()) return std::move(done.front());
  }
  throw BackendUnavailable("recipe did not finish within the drain window");
}

}  // namespace mocomp
