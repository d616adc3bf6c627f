#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mocomp {

enum class ModeGroup { Locomotion, SquatGround, Boxing, StyledWalking };

std::string_view group_name(ModeGroup g);

struct Range {
  double min = 0.0;
  double max = 0.0;

  double clamp(double v) const { return v < min ? min : (v > max ? max : v); }
  bool contains(double v) const { return v >= min && v <= max; }
  friend bool operator==(const Range&, const Range&) = default;
};

// One motion primitive the planner exposes.
struct ModeSpec {
  int index = 0;
  std::string name;
  ModeGroup group = ModeGroup::Locomotion;
  bool supports_speed = false;
  bool supports_heading = false;
  bool supports_height = false;
  std::optional<Range> speed_range;   // iff supports_speed
  double default_speed = 0.0;
  std::optional<Range> height_range;  // iff supports_height
  double default_height = 0.0;
  double gait_frequency = 0.0;  // cycles/s at default speed
  std::vector<std::string> verb_bank;
  std::vector<std::string> tempo_bank;  // slowest to fastest, iff supports_speed
};

// The immutable table of motion modes, loaded once and shared read-only.
class Registry {
 public:
  // Parses and validates a registry document. Throws RegistryLoadError naming
  // the offending entry.
  static Registry from_json(std::string_view text);
  static Registry load(const std::string& path);
  // The registry shipped with the library (data/registry.json).
  static const Registry& builtin();

  const std::vector<ModeSpec>& modes() const { return modes_; }
  std::size_t size() const { return modes_.size(); }

  // Throws UnknownMode.
  const ModeSpec& at(int index) const;
  const ModeSpec* find(std::string_view exact_name) const;
  // Case-insensitive, ignores everything but letters and digits:
  // "slowwalk", "Slow_Walk" and "Slow Walk" all match.
  const ModeSpec* find_loose(std::string_view key) const;

  // Union of every height-capable mode's height range.
  Range height_envelope() const { return height_envelope_; }
  // Largest speed any mode can realize.
  double max_speed() const;

  // Canonical serialized form; hashed into session manifests.
  const std::string& canonical_text() const { return canonical_; }

 private:
  std::vector<ModeSpec> modes_;
  Range height_envelope_;
  std::string canonical_;
};

std::string normalize_mode_key(std::string_view s);

// 64-bit FNV-1a rendered as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view data);

}  // namespace mocomp
