#pragma once

#include <cstdint>
#include <span>

#include "mocomp/protocol.hpp"

namespace mocomp {

struct QualityThresholds {
  double max_speed_jump = 0.2;   // m/s between consecutive finite-difference velocities
  double max_height_rate = 0.6;  // m/s
  std::int64_t half_window_ms = 500;
};

struct QualityReport {
  double max_speed_jump = 0.0;
  double max_height_rate = 0.0;
  bool pass = true;
};

inline constexpr std::size_t kMinSamplesPerSide = 5;

// Scans the samples within half_window_ms of switch_ms for velocity and
// pelvis-height-rate discontinuities. Velocities are finite differences of
// base position. Throws WindowTooShort when fewer than kMinSamplesPerSide
// samples lie on either side of the switch.
QualityReport transition_quality(std::span<const TelemetrySample> samples, std::int64_t switch_ms,
                                 const QualityThresholds& thresholds = {});

}  // namespace mocomp
