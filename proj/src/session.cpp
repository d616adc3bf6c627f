#include "mocomp/session.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "mocomp/annotation.hpp"
#include "mocomp/errors.hpp"

namespace mocomp {

std::string_view status_name(SessionStatus s) {
  switch (s) {
    case SessionStatus::Idle: return "idle";
    case SessionStatus::Keyboard: return "keyboard";
    case SessionStatus::RecipeRunning: return "recipe_running";
    case SessionStatus::Finishing: return "finishing";
  }
  return "?";
}

namespace {

constexpr int kSnapsPerTurn = 12;
constexpr double kCommandPeriodS = static_cast<double>(kCommandPeriodMs) / 1000.0;

bool is_movement_key(Key k) { return k != Key::R; }

Vec2 movement_vector(Movement m) {
  switch (m) {
    case Movement::Forward: return {1.0, 0.0};
    case Movement::Backward: return {-1.0, 0.0};
    case Movement::StrafeLeft: return {0.0, 1.0};
    case Movement::StrafeRight: return {0.0, -1.0};
    default: return {0.0, 0.0};
  }
}

std::int64_t ceil_to_tick(std::int64_t t) {
  return (t + kCommandPeriodMs - 1) / kCommandPeriodMs * kCommandPeriodMs;
}

template <class T>
void trim_from(std::vector<T>& v, std::int64_t end_ms) {
  std::erase_if(v, [&](const T& x) { return x.timestamp_ms >= end_ms; });
}

}  // namespace

Session::Session(const Registry& registry, SessionOptions options)
    : registry_(&registry), options_(std::move(options)) {
  const ModeSpec& m = registry.at(state_.ui_mode_index);
  state_.ui_speed = m.default_speed;
  state_.ui_height = m.default_height;
}

std::string Session::next_session_id(std::string_view kind) {
  return fmt::format("{}-{}-{:04d}", options_.session_prefix, kind, session_counter_++);
}

void Session::apply_ui_event(const UiEvent& ev, std::int64_t now_ms) {
  const bool in_recipe =
      state_.status == SessionStatus::RecipeRunning || state_.status == SessionStatus::Finishing;

  auto halt = [&] {
    state_.held_keys.clear();
    if (in_recipe) {
      abort_recipe();
    } else if (state_.status == SessionStatus::Keyboard) {
      halt_requested_ = true;
    }
  };

  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, KeyDown>) {
          if (e.key == Key::R) {
            halt();
            return;
          }
          if (in_recipe) {
            throw IgnoredDuringRecipe(fmt::format("key {} ignored while a recipe runs", key_name(e.key)));
          }
          if (e.key == Key::Q) {
            state_.heading_snaps = (state_.heading_snaps + 1) % kSnapsPerTurn;
          } else if (e.key == Key::E) {
            state_.heading_snaps = (state_.heading_snaps + kSnapsPerTurn - 1) % kSnapsPerTurn;
          } else if (is_movement_key(e.key)) {
            state_.held_keys.insert(e.key);
          }
          state_.status = SessionStatus::Keyboard;
          halt_requested_ = false;
        } else if constexpr (std::is_same_v<T, KeyUp>) {
          state_.held_keys.erase(e.key);
        } else if constexpr (std::is_same_v<T, SetMode>) {
          const ModeSpec& m = registry_->at(e.mode_index);
          state_.ui_mode_index = m.index;
          state_.ui_speed = m.default_speed;
          state_.ui_height = m.default_height;
          if (state_.status == SessionStatus::Idle) state_.status = SessionStatus::Keyboard;
          halt_requested_ = false;
        } else if constexpr (std::is_same_v<T, SetSpeed>) {
          const ModeSpec& m = registry_->at(state_.ui_mode_index);
          if (m.supports_speed) state_.ui_speed = m.speed_range->clamp(e.value);
        } else if constexpr (std::is_same_v<T, SetHeight>) {
          const ModeSpec& m = registry_->at(state_.ui_mode_index);
          if (m.supports_height) state_.ui_height = m.height_range->clamp(e.value);
        } else if constexpr (std::is_same_v<T, DispatchRecipe>) {
          if (in_recipe) throw IgnoredDuringRecipe("a recipe is already running");
          start_recipe(e.recipe, now_ms);
        } else if constexpr (std::is_same_v<T, Halt>) {
          halt();
        }
      },
      ev);
}

void Session::start_recipe(const Recipe& recipe, std::int64_t start_ms, std::string session_id) {
  if (state_.status == SessionStatus::RecipeRunning || state_.status == SessionStatus::Finishing) {
    throw IgnoredDuringRecipe("a recipe is already running");
  }
  validate_recipe(*registry_, recipe);

  RecipeRun run;
  run.recipe = recipe;
  const std::int64_t start = ceil_to_tick(start_ms);
  run.bounds = segment_boundaries_ms(recipe, start);
  for (std::size_t i = 0; i < recipe.segments.size(); ++i) {
    run.modes.push_back(resolve_mode(*registry_, recipe.segments[i].mode));
    run.first_tick.push_back(ceil_to_tick(run.bounds[i]));
    run.ticks.push_back(command_ticks_in(run.bounds[i], run.bounds[i + 1]));
  }
  run.base_offset = state_.turn_offset_rad;

  if (active_) finalize_recording(start);
  state_.held_keys.clear();
  state_.status = SessionStatus::RecipeRunning;
  halt_requested_ = false;
  pending_end_ms_.reset();

  if (session_id.empty()) session_id = next_session_id("recipe");
  begin_recording(start, std::move(session_id), recipe);
  active_is_keyboard_ = false;
  for (std::size_t i = 0; i < recipe.segments.size(); ++i) {
    active_->segments.push_back({static_cast<int>(i), run.modes[i], run.bounds[i], run.bounds[i + 1]});
  }
  run_ = std::move(run);
}

MetaCommand Session::halt_command(std::int64_t now_ms) const {
  MetaCommand cmd;
  cmd.timestamp_ms = now_ms;
  cmd.mode_index = state_.ui_mode_index;
  cmd.movement_dir = {0.0, 0.0};
  cmd.facing_dir = unit_from_angle(wrap_angle(state_.heading_target_rad() + state_.turn_offset_rad));
  cmd.speed = state_.ui_speed;
  cmd.pelvis_height = state_.ui_height;
  return cmd;
}

MetaCommand Session::keyboard_command(std::int64_t now_ms) {
  const auto& held = state_.held_keys;
  Vec2 move;
  if (held.contains(Key::W)) move = move + Vec2{1.0, 0.0};
  if (held.contains(Key::S)) move = move + Vec2{-1.0, 0.0};
  if (held.contains(Key::Comma)) move = move + Vec2{0.0, 1.0};
  if (held.contains(Key::Period)) move = move + Vec2{0.0, -1.0};
  const double len = norm(move);
  move = len > 0.0 ? move * (1.0 / len) : Vec2{};

  // A/D rotate the facing target continuously at the planner's turn rate.
  const int turn = (held.contains(Key::A) ? 1 : 0) - (held.contains(Key::D) ? 1 : 0);
  const ModeSpec& mode = registry_->at(state_.ui_mode_index);
  if (turn != 0 && mode.supports_heading) {
    state_.turn_offset_rad = wrap_angle(state_.turn_offset_rad + turn * options_.limits.max_turn_rate * kCommandPeriodS);
  }

  MetaCommand cmd = halt_command(now_ms);
  cmd.movement_dir = move;

  if (options_.record_keyboard) {
    if (!active_) {
      begin_recording(now_ms, next_session_id("keyboard"), Recipe{});
      active_is_keyboard_ = true;
      kb_key_.reset();
    }
    Movement kind = classify_direction(mode.supports_heading ? move : Vec2{});
    if (kind == Movement::None && turn != 0 && mode.supports_heading) {
      kind = turn > 0 ? Movement::TurnLeft : Movement::TurnRight;
    }
    const std::pair<int, Movement> key{mode.index, kind};
    if (kb_key_ != key) {
      auto& tags = active_->segments;
      if (!tags.empty()) tags.back().end_ms = now_ms;
      tags.push_back({static_cast<int>(tags.size()), mode.index, now_ms, now_ms});
      kb_key_ = key;
    }
  }
  return cmd;
}

MetaCommand Session::recipe_command(std::int64_t now_ms) {
  RecipeRun& run = *run_;
  if (now_ms >= run.bounds.back()) {
    const auto& last = registry_->at(run.modes.back());
    state_.ui_mode_index = last.index;
    state_.ui_speed = run.recipe.segments.back().speed.value_or(last.default_speed);
    state_.ui_height = run.recipe.segments.back().height.value_or(last.default_height);
    state_.status = SessionStatus::Finishing;
    pending_end_ms_ = run.bounds.back();
    return halt_command(now_ms);
  }

  int i = 0;
  while (now_ms >= run.bounds[static_cast<std::size_t>(i) + 1]) ++i;
  if (i != run.current) {
    run.current = i;
    run.base_offset = state_.turn_offset_rad;
  }
  const auto idx = static_cast<std::size_t>(i);
  const SegmentSpec& seg = run.recipe.segments[idx];
  const ModeSpec& mode = registry_->at(run.modes[idx]);
  const int n = run.ticks[idx];
  const int k = std::clamp(static_cast<int>((now_ms - run.first_tick[idx]) / kCommandPeriodMs), 0, n - 1);

  // Turns are spread uniformly so the first command of a segment faces its
  // start heading and the last one its end heading.
  double offset = run.base_offset;
  if (seg.turn_deg) {
    const double frac = n > 1 ? static_cast<double>(k) / (n - 1) : 0.0;
    offset += deg_to_rad(*seg.turn_deg) * frac;
  } else if (seg.movement == Movement::TurnLeft || seg.movement == Movement::TurnRight) {
    const double sign = seg.movement == Movement::TurnLeft ? 1.0 : -1.0;
    offset += sign * options_.limits.max_turn_rate * kCommandPeriodS * k;
  }
  state_.turn_offset_rad = offset;

  MetaCommand cmd;
  cmd.timestamp_ms = now_ms;
  cmd.mode_index = mode.index;
  cmd.movement_dir = movement_vector(seg.movement);
  cmd.facing_dir = unit_from_angle(wrap_angle(state_.heading_target_rad() + offset));
  cmd.speed = seg.speed.value_or(mode.default_speed);
  cmd.pelvis_height = seg.height.value_or(mode.default_height);
  return cmd;
}

MetaCommand Session::tick_command(std::int64_t now_ms) {
  if (halt_requested_) {
    halt_requested_ = false;
    if (active_ && active_is_keyboard_) finalize_recording(now_ms);
    enter_idle();
  }

  MetaCommand cmd;
  bool record = false;
  switch (state_.status) {
    case SessionStatus::Idle:
    case SessionStatus::Finishing:
      cmd = halt_command(now_ms);
      break;
    case SessionStatus::Keyboard:
      cmd = keyboard_command(now_ms);
      record = active_.has_value();
      break;
    case SessionStatus::RecipeRunning:
      cmd = recipe_command(now_ms);
      record = state_.status == SessionStatus::RecipeRunning;
      break;
  }
  cmd = clamp_command(*registry_, cmd);
  if (record) active_->commands.push_back(cmd);
  last_command_ = cmd;
  return cmd;
}

void Session::on_telemetry(const TelemetrySample& sample, Channel channel) {
  const auto c = static_cast<int>(channel);
  if (last_ts_[c] && sample.timestamp_ms <= *last_ts_[c]) {
    ++dropped_[c];
    return;
  }
  last_ts_[c] = sample.timestamp_ms;
  if (channel == Channel::Reference) latest_ = sample;

  if (active_ && !active_->segments.empty() && sample.timestamp_ms >= active_->segments.front().start_ms) {
    const bool before_end = !pending_end_ms_ || sample.timestamp_ms < *pending_end_ms_;
    if (before_end) (channel == Channel::Reference ? active_->reference : active_->executed).push_back(sample);
  }
  if (state_.status == SessionStatus::Finishing && channel == Channel::Reference && pending_end_ms_ &&
      sample.timestamp_ms >= *pending_end_ms_) {
    finish_pending();
  }
}

void Session::finish_pending() {
  if (state_.status != SessionStatus::Finishing || !pending_end_ms_) return;
  finalize_recording(*pending_end_ms_);
  run_.reset();
  enter_idle();
}

void Session::begin_recording(std::int64_t start_ms, std::string session_id, Recipe recipe) {
  Recording rec;
  rec.session_id = std::move(session_id);
  rec.recipe = std::move(recipe);
  rec.backend_name = options_.backend_name;
  rec.joints_dim = options_.joints_dim;
  active_ = std::move(rec);
  (void)start_ms;
}

void Session::finalize_recording(std::int64_t end_ms) {
  if (!active_) return;
  Recording rec = std::move(*active_);
  active_.reset();
  pending_end_ms_.reset();
  if (rec.segments.empty() || end_ms <= rec.segments.front().start_ms) return;

  trim_from(rec.commands, end_ms);
  trim_from(rec.reference, end_ms);
  trim_from(rec.executed, end_ms);

  if (active_is_keyboard_) {
    rec.segments.back().end_ms = end_ms;
    std::erase_if(rec.segments, [](const SegmentTag& t) { return t.end_ms <= t.start_ms; });
    rec.recipe.name = rec.session_id;
    rec.recipe.seed = 0;
    for (std::size_t i = 0; i < rec.segments.size(); ++i) {
      auto& tag = rec.segments[i];
      tag.index = static_cast<int>(i);
      std::vector<MetaCommand> cmds;
      for (const auto& c : rec.commands) {
        if (c.timestamp_ms >= tag.start_ms && c.timestamp_ms < tag.end_ms) cmds.push_back(c);
      }
      const SegmentIntent intent = derive_intent(*registry_, cmds, tag);
      const ModeSpec& mode = registry_->at(tag.mode);
      SegmentSpec spec;
      spec.mode = mode.name;
      spec.duration_s = static_cast<double>(tag.end_ms - tag.start_ms) / 1000.0;
      spec.movement = intent.movement;
      spec.turn_deg = intent.turn_deg;
      if (mode.supports_speed) spec.speed = intent.speed;
      spec.height = intent.height;
      rec.recipe.segments.push_back(std::move(spec));
    }
    kb_key_.reset();
  }
  if (!rec.segments.empty()) finished_.push_back(std::move(rec));
}

void Session::abort_recipe() {
  active_.reset();
  run_.reset();
  pending_end_ms_.reset();
  enter_idle();
}

void Session::enter_idle() {
  state_.status = SessionStatus::Idle;
  state_.held_keys.clear();
}

std::vector<Recording> Session::take_finished() {
  std::vector<Recording> out;
  out.swap(finished_);
  return out;
}

std::optional<int> Session::active_segment() const {
  if (state_.status != SessionStatus::RecipeRunning || !run_ || run_->current < 0) return std::nullopt;
  return run_->current;
}

std::optional<std::int64_t> Session::recipe_end_ms() const {
  if (!run_) return std::nullopt;
  return run_->bounds.back();
}

nlohmann::ordered_json Session::state_record(double fps) const {
  nlohmann::ordered_json j;
  j["type"] = "state";
  j["status"] = status_name(state_.status);
  const int mode = last_command_ ? last_command_->mode_index : state_.ui_mode_index;
  j["mode"] = mode;
  j["mode_name"] = registry_->at(mode).name;
  j["movement"] = movement_name(last_command_ ? classify_direction(last_command_->movement_dir) : Movement::None);
  double heading_deg = std::fmod(rad_to_deg(state_.heading_target_rad() + state_.turn_offset_rad), 360.0);
  if (heading_deg < 0.0) heading_deg += 360.0;
  j["heading_deg"] = heading_deg;
  j["speed"] = latest_ ? norm(latest_->base_vel) : 0.0;
  j["height"] = latest_ ? latest_->pelvis_height : state_.ui_height;
  j["fps"] = fps;
  j["pos"] = latest_ ? nlohmann::ordered_json::array({latest_->base_pos.x, latest_->base_pos.y})
                     : nlohmann::ordered_json::array({0.0, 0.0});
  j["actual_heading_deg"] = latest_ ? rad_to_deg(latest_->heading_rad) : 0.0;
  if (const auto seg = active_segment()) {
    j["segment"] = *seg;
  } else {
    j["segment"] = nullptr;
  }
  j["recording"] = active_.has_value();
  j["dropped"] = dropped_[0] + dropped_[1];
  return j;
}

}  // namespace mocomp
