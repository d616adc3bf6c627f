#include "mocomp/quality.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "mocomp/errors.hpp"

namespace mocomp {

QualityReport transition_quality(std::span<const TelemetrySample> samples, std::int64_t switch_ms,
                                 const QualityThresholds& thresholds) {
  std::vector<const TelemetrySample*> window;
  std::size_t before = 0;
  std::size_t after = 0;
  for (const auto& s : samples) {
    if (s.timestamp_ms < switch_ms - thresholds.half_window_ms || s.timestamp_ms > switch_ms + thresholds.half_window_ms) {
      continue;
    }
    window.push_back(&s);
    (s.timestamp_ms < switch_ms ? before : after) += 1;
  }
  if (before < kMinSamplesPerSide || after < kMinSamplesPerSide) {
    throw WindowTooShort(fmt::format("transition at {} ms has {} samples before and {} after, need {}", switch_ms,
                                     before, after, kMinSamplesPerSide));
  }
  std::stable_sort(window.begin(), window.end(),
                   [](const auto* a, const auto* b) { return a->timestamp_ms < b->timestamp_ms; });

  QualityReport report;
  std::optional<Vec2> prev_vel;
  for (std::size_t i = 1; i < window.size(); ++i) {
    const auto& a = *window[i - 1];
    const auto& b = *window[i];
    const double dt = static_cast<double>(b.timestamp_ms - a.timestamp_ms) / 1000.0;
    if (dt <= 0.0) continue;
    const Vec2 vel{(b.base_pos.x - a.base_pos.x) / dt, (b.base_pos.y - a.base_pos.y) / dt};
    if (prev_vel) report.max_speed_jump = std::max(report.max_speed_jump, norm(vel - *prev_vel));
    prev_vel = vel;
    report.max_height_rate = std::max(report.max_height_rate, std::abs(b.pelvis_height - a.pelvis_height) / dt);
  }
  report.pass = report.max_speed_jump <= thresholds.max_speed_jump && report.max_height_rate <= thresholds.max_height_rate;
  return report;
}

}  // namespace mocomp
