#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace mocomp {

class Registry;

enum class Movement { Forward, Backward, StrafeLeft, StrafeRight, TurnLeft, TurnRight, None };

std::string_view movement_name(Movement m);
std::optional<Movement> parse_movement(std::string_view s);

// A segment names its mode either by registry index or by exact name.
using ModeRef = std::variant<int, std::string>;

struct SegmentSpec {
  ModeRef mode = 0;
  double duration_s = 1.0;
  Movement movement = Movement::None;
  std::optional<double> turn_deg;
  std::optional<double> speed;
  std::optional<double> height;

  friend bool operator==(const SegmentSpec&, const SegmentSpec&) = default;
};

// Time span of one executed segment in session milliseconds.
struct SegmentTag {
  int index = 0;
  int mode = 0;
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;  // exclusive

  friend bool operator==(const SegmentTag&, const SegmentTag&) = default;
};

struct Recipe {
  std::string name;
  std::uint64_t seed = 0;
  std::vector<SegmentSpec> segments;

  friend bool operator==(const Recipe&, const Recipe&) = default;
};

nlohmann::ordered_json recipe_to_json(const Recipe& r);
// Throws InvalidRecipe on schema errors.
Recipe recipe_from_json(const nlohmann::json& j);
Recipe load_recipe(const std::string& path);

// Resolves a segment's mode against the registry. Throws InvalidRecipe.
int resolve_mode(const Registry& registry, const ModeRef& ref);

// Checks every segment against the registry; the exception message names the
// segment index and the field. Throws InvalidRecipe.
void validate_recipe(const Registry& registry, const Recipe& recipe);

// Segment boundaries in session milliseconds: boundaries[i] is the start of
// segment i, boundaries.back() the end of the recipe.
std::vector<std::int64_t> segment_boundaries_ms(const Recipe& recipe, std::int64_t start_ms = 0);

// Number of command ticks (non-negative multiples of the command period) in
// [begin_ms, end_ms).
int command_ticks_in(std::int64_t begin_ms, std::int64_t end_ms);

}  // namespace mocomp
