#include "mocomp/recipe.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "mocomp/errors.hpp"
#include "mocomp/planner.hpp"
#include "mocomp/registry.hpp"

namespace mocomp {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::array<std::pair<Movement, std::string_view>, 7> kMovementNames = {{
    {Movement::Forward, "forward"},
    {Movement::Backward, "backward"},
    {Movement::StrafeLeft, "strafe_left"},
    {Movement::StrafeRight, "strafe_right"},
    {Movement::TurnLeft, "turn_left"},
    {Movement::TurnRight, "turn_right"},
    {Movement::None, "none"},
}};

[[noreturn]] void fail(std::size_t segment, std::string_view field, std::string_view what) {
  throw InvalidRecipe(fmt::format("segment {} field {}: {}", segment, field, what));
}

std::optional<double> optional_number(const json& seg, const char* key, std::size_t i) {
  if (!seg.contains(key) || seg[key].is_null()) return std::nullopt;
  if (!seg[key].is_number()) fail(i, key, "must be a number");
  return seg[key].get<double>();
}

}  // namespace

int command_ticks_in(std::int64_t begin_ms, std::int64_t end_ms) {
  const auto first = (begin_ms + kCommandPeriodMs - 1) / kCommandPeriodMs;
  const auto last = (end_ms + kCommandPeriodMs - 1) / kCommandPeriodMs;
  return static_cast<int>(last - first);
}

std::string_view movement_name(Movement m) {
  for (const auto& [mv, name] : kMovementNames) {
    if (mv == m) return name;
  }
  return "?";
}

std::optional<Movement> parse_movement(std::string_view s) {
  for (const auto& [mv, name] : kMovementNames) {
    if (name == s) return mv;
  }
  return std::nullopt;
}

ordered_json recipe_to_json(const Recipe& r) {
  ordered_json j;
  j["name"] = r.name;
  j["seed"] = r.seed;
  j["segments"] = ordered_json::array();
  for (const auto& s : r.segments) {
    ordered_json seg;
    if (std::holds_alternative<int>(s.mode)) {
      seg["mode"] = std::get<int>(s.mode);
    } else {
      seg["mode"] = std::get<std::string>(s.mode);
    }
    seg["duration_s"] = s.duration_s;
    seg["movement"] = movement_name(s.movement);
    if (s.turn_deg) seg["turn_deg"] = *s.turn_deg;
    if (s.speed) seg["speed"] = *s.speed;
    if (s.height) seg["height"] = *s.height;
    j["segments"].push_back(std::move(seg));
  }
  return j;
}

Recipe recipe_from_json(const json& j) {
  if (!j.is_object()) throw InvalidRecipe("recipe must be an object");
  Recipe r;
  if (!j.contains("name") || !j["name"].is_string()) throw InvalidRecipe("recipe needs a string 'name'");
  r.name = j["name"].get<std::string>();
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<std::int64_t>() >= 0)) {
      throw InvalidRecipe("recipe 'seed' must be a non-negative integer");
    }
    r.seed = j["seed"].get<std::uint64_t>();
  }
  if (!j.contains("segments") || !j["segments"].is_array()) throw InvalidRecipe("recipe needs a 'segments' list");
  const auto& segs = j["segments"];
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const auto& seg = segs[i];
    if (!seg.is_object()) throw InvalidRecipe(fmt::format("segment {}: not an object", i));
    SegmentSpec s;
    if (!seg.contains("mode")) fail(i, "mode", "missing");
    if (seg["mode"].is_number_integer()) {
      s.mode = seg["mode"].get<int>();
    } else if (seg["mode"].is_string()) {
      s.mode = seg["mode"].get<std::string>();
    } else {
      fail(i, "mode", "must be an index or a mode name");
    }
    const auto duration = optional_number(seg, "duration_s", i);
    if (!duration) fail(i, "duration_s", "missing");
    s.duration_s = *duration;
    if (seg.contains("movement")) {
      if (!seg["movement"].is_string()) fail(i, "movement", "must be a string");
      const auto mv = parse_movement(seg["movement"].get<std::string>());
      if (!mv) fail(i, "movement", "unknown movement '" + seg["movement"].get<std::string>() + "'");
      s.movement = *mv;
    }
    s.turn_deg = optional_number(seg, "turn_deg", i);
    s.speed = optional_number(seg, "speed", i);
    s.height = optional_number(seg, "height", i);
    r.segments.push_back(std::move(s));
  }
  return r;
}

Recipe load_recipe(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidRecipe("cannot open recipe file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const json j = json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw InvalidRecipe(path + ": not valid JSON");
  return recipe_from_json(j);
}

int resolve_mode(const Registry& registry, const ModeRef& ref) {
  if (const int* idx = std::get_if<int>(&ref)) {
    if (*idx < 0 || static_cast<std::size_t>(*idx) >= registry.size()) {
      throw InvalidRecipe(fmt::format("mode index {} is not in the registry", *idx));
    }
    return *idx;
  }
  const auto& name = std::get<std::string>(ref);
  if (const ModeSpec* m = registry.find(name)) return m->index;
  throw InvalidRecipe(fmt::format("unknown mode '{}'", name));
}

std::vector<std::int64_t> segment_boundaries_ms(const Recipe& recipe, std::int64_t start_ms) {
  std::vector<std::int64_t> out;
  out.reserve(recipe.segments.size() + 1);
  out.push_back(start_ms);
  double total = 0.0;
  for (const auto& s : recipe.segments) {
    total += s.duration_s;
    out.push_back(start_ms + static_cast<std::int64_t>(std::llround(total * 1000.0)));
  }
  return out;
}

void validate_recipe(const Registry& registry, const Recipe& recipe) {
  if (recipe.segments.empty()) throw InvalidRecipe("recipe has no segments");
  for (const auto& s : recipe.segments) {
    if (!std::isfinite(s.duration_s)) throw InvalidRecipe("segment duration must be finite");
  }
  const auto bounds = segment_boundaries_ms(recipe);
  for (std::size_t i = 0; i < recipe.segments.size(); ++i) {
    const auto& s = recipe.segments[i];
    int mode_index = 0;
    try {
      mode_index = resolve_mode(registry, s.mode);
    } catch (const InvalidRecipe& e) {
      fail(i, "mode", e.what());
    }
    const ModeSpec& mode = registry.at(mode_index);

    if (!(s.duration_s > 0.0)) fail(i, "duration_s", "must be > 0");
    const int ticks = command_ticks_in(bounds[i], bounds[i + 1]);
    if (ticks < 1) fail(i, "duration_s", fmt::format("shorter than one {} ms command period", kCommandPeriodMs));

    if (s.movement != Movement::None && !mode.supports_heading) {
      fail(i, "movement", fmt::format("'{}' has no heading support", mode.name));
    }
    if (s.speed) {
      if (!mode.supports_speed) fail(i, "speed", fmt::format("'{}' has no speed support", mode.name));
      if (!std::isfinite(*s.speed) || !mode.speed_range->contains(*s.speed)) {
        fail(i, "speed", fmt::format("{} outside [{}, {}]", *s.speed, mode.speed_range->min, mode.speed_range->max));
      }
    }
    if (s.height) {
      if (!mode.supports_height) fail(i, "height", fmt::format("'{}' has no height support", mode.name));
      if (!std::isfinite(*s.height) || !mode.height_range->contains(*s.height)) {
        fail(i, "height",
             fmt::format("{} outside [{}, {}]", *s.height, mode.height_range->min, mode.height_range->max));
      }
    }
    if (s.turn_deg) {
      const double turn = *s.turn_deg;
      if (!mode.supports_heading) fail(i, "turn_deg", fmt::format("'{}' has no heading support", mode.name));
      if (!std::isfinite(turn)) fail(i, "turn_deg", "must be finite");
      if ((s.movement == Movement::TurnLeft && turn < 0.0) || (s.movement == Movement::TurnRight && turn > 0.0)) {
        fail(i, "turn_deg", "sign contradicts the turn direction");
      }
      if (turn != 0.0 && ticks < 2) fail(i, "turn_deg", "a turn needs at least two command periods");
      if (ticks >= 2 && std::abs(turn) / (ticks - 1) > 90.0) {
        fail(i, "turn_deg", "more than 90 degrees per command period");
      }
    }
  }
}

}  // namespace mocomp
