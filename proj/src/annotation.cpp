#include "mocomp/annotation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "embedded_data.hpp"
#include "mocomp/errors.hpp"

namespace mocomp {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::array<Movement, 7> kMovements = {Movement::Forward,   Movement::Backward,    Movement::StrafeLeft,
                                                Movement::StrafeRight, Movement::TurnLeft, Movement::TurnRight,
                                                Movement::None};
constexpr std::array<TurnSize, 5> kTurnSizes = {TurnSize::Slight, TurnSize::Partial, TurnSize::Quarter, TurnSize::Half,
                                                TurnSize::Full};

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::pair<std::string, std::string> split_head(std::string_view phrase) {
  const auto sp = phrase.find(' ');
  if (sp == std::string_view::npos) return {std::string(phrase), {}};
  return {std::string(phrase.substr(0, sp)), std::string(phrase.substr(sp))};
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

// A word doubles its final consonant before -ing when its only vowel is a
// single letter right before that consonant (step, jog, squat).
bool doubles_final(std::string_view word) {
  const auto hyphen = word.rfind('-');
  if (hyphen != std::string_view::npos) word = word.substr(hyphen + 1);
  if (word.size() < 2) return false;
  const char last = word.back();
  if (is_vowel(last) || last == 'w' || last == 'x' || last == 'y') return false;
  int groups = 0;
  std::size_t group_len = 0;
  std::size_t group_end = 0;
  bool in_group = false;
  for (std::size_t i = 0; i < word.size(); ++i) {
    const bool v = is_vowel(word[i]) && !(word[i] == 'u' && i > 0 && word[i - 1] == 'q');
    if (v && !in_group) {
      ++groups;
      group_len = 0;
    }
    if (v) {
      ++group_len;
      group_end = i;
    }
    in_group = v;
  }
  return groups == 1 && group_len == 1 && group_end + 2 == word.size();
}

std::string format_seconds(double s) { return fmt::format("{:.1f}", s); }

const std::vector<std::string>& checked_strings(const json& doc, const char* key, std::vector<std::string>& out) {
  if (!doc.contains(key) || !doc[key].is_array() || doc[key].empty()) {
    throw BankLoadError(fmt::format("banks: '{}' must be a non-empty list", key));
  }
  for (const auto& s : doc[key]) {
    if (!s.is_string() || s.get<std::string>().empty()) {
      throw BankLoadError(fmt::format("banks: '{}' must hold non-empty strings", key));
    }
    out.push_back(s.get<std::string>());
  }
  return out;
}

std::optional<StyleId> parse_style_label(std::string_view label) {
  for (const auto& s : all_styles()) {
    if (style_label(s) == label) return s;
  }
  return std::nullopt;
}

template <class T>
T modal_value(const std::vector<T>& values, T fallback) {
  std::map<T, int> counts;
  for (const auto& v : values) ++counts[v];
  T best = fallback;
  int best_count = 0;
  for (const auto& [v, c] : counts) {
    if (c > best_count) {
      best = v;
      best_count = c;
    }
  }
  return best;
}

}  // namespace

std::string_view register_name(Register r) {
  switch (r) {
    case Register::Instruction: return "instruction";
    case Register::Natural: return "natural";
    case Register::Narrative: return "narrative";
    case Register::Concise: return "concise";
  }
  return "?";
}

const std::array<StyleId, kStyleCount>& all_styles() {
  static const std::array<StyleId, kStyleCount> styles = {{
      {Register::Instruction, true},
      {Register::Instruction, false},
      {Register::Natural, true},
      {Register::Natural, false},
      {Register::Narrative, true},
      {Register::Narrative, false},
      {Register::Concise, true},
      {Register::Concise, false},
  }};
  return styles;
}

std::string style_label(StyleId s) {
  return fmt::format("{}{}", register_name(s.reg), s.with_duration ? "+duration" : "");
}

ordered_json intent_to_json(const SegmentIntent& intent) {
  ordered_json j;
  j["mode"] = intent.mode_index;
  j["movement"] = movement_name(intent.movement);
  if (intent.turn_deg) j["turn_deg"] = *intent.turn_deg;
  j["speed"] = intent.speed;
  j["duration_s"] = intent.duration_s;
  if (intent.height) j["height"] = *intent.height;
  return j;
}

SegmentIntent intent_from_json(const json& j) {
  try {
    SegmentIntent out;
    out.mode_index = j.at("mode").get<int>();
    const auto mv = parse_movement(j.at("movement").get<std::string>());
    if (!mv) throw ParseError("intent: unknown movement " + j.at("movement").dump());
    out.movement = *mv;
    if (j.contains("turn_deg")) out.turn_deg = j["turn_deg"].get<double>();
    out.speed = j.at("speed").get<double>();
    out.duration_s = j.at("duration_s").get<double>();
    if (j.contains("height")) out.height = j["height"].get<double>();
    return out;
  } catch (const json::exception& e) {
    throw ParseError(std::string("intent: ") + e.what());
  }
}

Movement classify_direction(Vec2 dir) {
  if (norm(dir) < 1e-9) return Movement::None;
  if (std::abs(dir.x) >= std::abs(dir.y)) return dir.x > 0.0 ? Movement::Forward : Movement::Backward;
  return dir.y > 0.0 ? Movement::StrafeLeft : Movement::StrafeRight;
}

double accumulated_turn_rad(std::span<const MetaCommand> commands) {
  double total = 0.0;
  for (std::size_t i = 1; i < commands.size(); ++i) {
    total += wrap_angle(angle_of(commands[i].facing_dir) - angle_of(commands[i - 1].facing_dir));
  }
  return total;
}

SegmentIntent derive_intent(const Registry& registry, std::span<const MetaCommand> cmds, const SegmentTag& tag) {
  const ModeSpec& mode = registry.at(tag.mode);
  SegmentIntent out;
  out.mode_index = mode.index;
  out.duration_s = static_cast<double>(tag.end_ms - tag.start_ms) / 1000.0;

  std::vector<int> kinds;
  std::vector<double> speeds;
  std::vector<double> heights;
  for (const auto& c : cmds) {
    const Movement m = classify_direction(c.movement_dir);
    if (m != Movement::None) kinds.push_back(static_cast<int>(m));
    speeds.push_back(c.speed);
    heights.push_back(c.pelvis_height);
  }
  out.speed = modal_value(speeds, mode.default_speed);
  if (mode.supports_height) out.height = modal_value(heights, mode.default_height);
  if (!mode.supports_heading) return out;

  out.movement = static_cast<Movement>(modal_value(kinds, static_cast<int>(Movement::None)));
  const double turn = rad_to_deg(accumulated_turn_rad(cmds));
  if (std::abs(turn) > 1e-6) {
    out.turn_deg = turn;
    if (out.movement == Movement::None) out.movement = turn > 0.0 ? Movement::TurnLeft : Movement::TurnRight;
  }
  return out;
}

std::string_view turn_size_name(TurnSize t) {
  switch (t) {
    case TurnSize::Slight: return "slight";
    case TurnSize::Partial: return "partial";
    case TurnSize::Quarter: return "quarter";
    case TurnSize::Half: return "half";
    case TurnSize::Full: return "full";
  }
  return "?";
}

TurnBucket turn_bucket(double turn_deg) {
  const double a = std::abs(turn_deg);
  TurnBucket b;
  b.left = turn_deg >= 0.0;
  if (a < 15.0) {
    b.size = TurnSize::Slight;
  } else if (a < 60.0) {
    b.size = TurnSize::Partial;
  } else if (a < 120.0) {
    b.size = TurnSize::Quarter;
  } else if (a < 240.0) {
    b.size = TurnSize::Half;
  } else {
    b.size = TurnSize::Full;
  }
  return b;
}

const std::string& tempo_adverb(const ModeSpec& mode, double speed) {
  if (!mode.supports_speed || mode.tempo_bank.empty()) {
    throw NoTempoBank(fmt::format("mode '{}' has no speed support", mode.name));
  }
  const Range r = *mode.speed_range;
  const double s = r.clamp(speed);
  const auto n = mode.tempo_bank.size();
  const auto idx = static_cast<std::size_t>(std::floor((s - r.min) / (r.max - r.min) * static_cast<double>(n)));
  return mode.tempo_bank[std::min(idx, n - 1)];
}

const std::vector<std::string>& verb_bank_lookup(const Registry& registry, int mode_index) {
  return registry.at(mode_index).verb_bank;
}

Banks Banks::from_json(std::string_view text) {
  const json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw BankLoadError("banks: not a JSON object");
  Banks b;
  try {
    for (Movement m : kMovements) {
      const std::string key(movement_name(m));
      std::vector<std::string> dirs;
      if (!doc.contains("directions") || !doc["directions"].contains(key)) {
        throw BankLoadError("banks: missing direction bank '" + key + "'");
      }
      checked_strings(doc["directions"], key.c_str(), dirs);
      b.directions[m] = std::move(dirs);
      if (!doc.contains("concise_directions") || !doc["concise_directions"].contains(key) ||
          !doc["concise_directions"][key].is_string()) {
        throw BankLoadError("banks: missing concise direction '" + key + "'");
      }
      b.concise_directions[m] = doc["concise_directions"][key].get<std::string>();
    }
    if (doc.contains("manner")) {
      if (!doc["manner"].is_object()) throw BankLoadError("banks: 'manner' must map mode names to lists");
      for (const auto& [name, _] : doc["manner"].items()) {
        std::vector<std::string> words;
        checked_strings(doc["manner"], name.c_str(), words);
        b.manner[name] = std::move(words);
      }
    }
    checked_strings(doc, "default_manner", b.default_manner);
    checked_strings(doc, "turn_verbs", b.turn_verbs);
    checked_strings(doc, "connectives", b.connectives);
    checked_strings(doc, "open_ended", b.open_ended);
    for (TurnSize t : kTurnSizes) {
      const std::string key(turn_size_name(t));
      if (!doc.contains("turn_sizes") || !doc["turn_sizes"].contains(key) || !doc["turn_sizes"][key].is_string()) {
        throw BankLoadError("banks: missing turn size phrase '" + key + "'");
      }
      b.turn_sizes[t] = doc["turn_sizes"][key].get<std::string>();
    }
  } catch (const json::exception& e) {
    throw BankLoadError(std::string("banks: ") + e.what());
  }
  b.canonical_ = doc.dump();
  return b;
}

Banks Banks::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw BankLoadError("cannot open bank file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

const Banks& Banks::builtin() {
  static const Banks banks = from_json(embedded::kBanksJson);
  return banks;
}

const std::vector<std::string>& Banks::manner_for(const ModeSpec& mode) const {
  const auto it = manner.find(mode.name);
  return it != manner.end() ? it->second : default_manner;
}

std::string third_person(std::string_view phrase) {
  auto [head, rest] = split_head(phrase);
  if (head.empty()) return std::string(phrase);
  const char last = head.back();
  if (ends_with(head, "s") || ends_with(head, "sh") || ends_with(head, "ch") || ends_with(head, "x") ||
      ends_with(head, "z") || ends_with(head, "o")) {
    head += "es";
  } else if (last == 'y' && head.size() > 1 && !is_vowel(head[head.size() - 2])) {
    head.back() = 'i';
    head += "es";
  } else {
    head += "s";
  }
  return head + rest;
}

std::string gerund(std::string_view phrase) {
  auto [head, rest] = split_head(phrase);
  if (head.empty()) return std::string(phrase);
  if (ends_with(head, "ie") && head.size() <= 3) {
    head.resize(head.size() - 2);
    head += "ying";
  } else if (head.back() == 'e' && !ends_with(head, "ee") && !ends_with(head, "oe") && !ends_with(head, "ye") &&
             !ends_with(head, "ie") && head.size() > 2) {
    head.pop_back();
    head += "ing";
  } else if (doubles_final(head)) {
    head += head.back();
    head += "ing";
  } else {
    head += "ing";
  }
  return head + rest;
}

std::string annotations_to_text(const AnnotationSet& set) {
  ordered_json j;
  j["seed"] = set.seed;
  j["styles"] = ordered_json::array();
  for (const auto& s : all_styles()) j["styles"].push_back(style_label(s));
  j["segments"] = ordered_json::array();
  for (const auto& seg : set.per_segment) {
    ordered_json row = ordered_json::array();
    for (const auto& text : seg) row.push_back(text);
    j["segments"].push_back(std::move(row));
  }
  j["trajectory"] = ordered_json::array();
  for (const auto& d : set.trajectory) {
    ordered_json e;
    e["style"] = d.variant < 0 ? std::string("summary") : style_label(d.style);
    e["variant"] = d.variant;
    e["text"] = d.text;
    e["connectives"] = d.connectives;
    j["trajectory"].push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

AnnotationSet annotations_from_text(std::string_view text) {
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("annotations: not a JSON object");
  AnnotationSet set;
  try {
    set.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& row : j.at("segments")) {
      if (!row.is_array() || row.size() != kStyleCount) {
        throw ParseError(fmt::format("annotations: each segment needs {} renderings", kStyleCount));
      }
      std::array<std::string, kStyleCount> seg;
      for (std::size_t i = 0; i < kStyleCount; ++i) seg[i] = row[i].get<std::string>();
      set.per_segment.push_back(std::move(seg));
    }
    for (const auto& e : j.at("trajectory")) {
      TrajectoryDescription d;
      d.variant = e.at("variant").get<int>();
      const auto label = e.at("style").get<std::string>();
      if (label == "summary") {
        d.style = {Register::Concise, false};
      } else if (const auto s = parse_style_label(label)) {
        d.style = *s;
      } else {
        throw ParseError("annotations: unknown style '" + label + "'");
      }
      d.text = e.at("text").get<std::string>();
      d.connectives = e.at("connectives").get<std::vector<std::string>>();
      set.trajectory.push_back(std::move(d));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("annotations: ") + e.what());
  }
  return set;
}

namespace {

const std::vector<std::string>& direction_bank(const Banks& banks, const SegmentIntent& intent) {
  const bool turn_move = intent.movement == Movement::TurnLeft || intent.movement == Movement::TurnRight;
  return banks.directions.at(turn_move && intent.turn_deg ? Movement::None : intent.movement);
}

}  // namespace

ClauseDraws Annotator::draw(const SegmentIntent& intent, StyleId style, SplitMix64& rng) const {
  const ModeSpec& mode = registry_->at(intent.mode_index);
  ClauseDraws d;
  d.verb = rng.below(mode.verb_bank.size());
  if (style.reg != Register::Concise) d.direction = rng.below(direction_bank(*banks_, intent).size());
  if (style.reg == Register::Natural && !mode.supports_speed) d.manner = rng.below(banks_->manner_for(mode).size());
  if (intent.turn_deg && style.reg != Register::Concise) d.turn_verb = rng.below(banks_->turn_verbs.size());
  if (style.reg == Register::Natural && !style.with_duration) d.open_ended = rng.below(banks_->open_ended.size());
  return d;
}

std::string Annotator::clause(const SegmentIntent& intent, StyleId style, Form form, const ClauseDraws& draws) const {
  const ModeSpec& mode = registry_->at(intent.mode_index);
  const std::string& verb = mode.verb_bank.at(draws.verb % mode.verb_bank.size());
  std::string out;
  switch (form) {
    case Form::Imperative:
    case Form::Keyword: out = verb; break;
    case Form::Finite: out = third_person(verb); break;
    case Form::Gerund: out = gerund(verb); break;
  }

  if (style.reg == Register::Concise) {
    const bool turn_move = intent.movement == Movement::TurnLeft || intent.movement == Movement::TurnRight;
    out += " " + banks_->concise_directions.at(turn_move && intent.turn_deg ? Movement::None : intent.movement);
    if (mode.supports_speed) out += " " + tempo_adverb(mode, intent.speed);
    if (intent.turn_deg) {
      const TurnBucket b = turn_bucket(*intent.turn_deg);
      out += fmt::format(" {} {} turn", turn_size_name(b.size), b.left ? "left" : "right");
    }
    if (style.with_duration) out += " " + format_seconds(intent.duration_s) + "s";
    return out;
  }

  const auto& dirs = direction_bank(*banks_, intent);
  out += " " + dirs.at(draws.direction % dirs.size());
  if (mode.supports_speed) {
    out += " " + tempo_adverb(mode, intent.speed);
  } else if (style.reg == Register::Natural) {
    const auto& manner = banks_->manner_for(mode);
    out += " " + manner.at(draws.manner % manner.size());
  }
  if (intent.turn_deg) {
    const TurnBucket b = turn_bucket(*intent.turn_deg);
    const auto& tv = banks_->turn_verbs;
    out += fmt::format(" while {} {} to the {}", tv.at(draws.turn_verb % tv.size()), banks_->turn_sizes.at(b.size),
                       b.left ? "left" : "right");
  }
  if (style.reg == Register::Natural) {
    if (style.with_duration) {
      out += " for about " + format_seconds(intent.duration_s) + " seconds";
    } else {
      out += " " + banks_->open_ended.at(draws.open_ended % banks_->open_ended.size());
    }
  } else if (style.with_duration) {
    out += " for " + format_seconds(intent.duration_s) + " seconds";
  }
  return out;
}

std::string Annotator::render_with(const SegmentIntent& intent, StyleId style, const ClauseDraws& draws) const {
  switch (style.reg) {
    case Register::Instruction:
    case Register::Natural: return capitalize(clause(intent, style, Form::Imperative, draws));
    case Register::Narrative: return "The robot " + clause(intent, style, Form::Finite, draws);
    case Register::Concise: return clause(intent, style, Form::Keyword, draws);
  }
  return {};
}

std::string Annotator::render_segment(const SegmentIntent& intent, StyleId style, SplitMix64& rng) const {
  return render_with(intent, style, draw(intent, style, rng));
}

std::string Annotator::describe(std::span<const SegmentIntent> intents, StyleId style, SplitMix64& rng,
                                std::vector<std::string>& connectives) const {
  std::string text;
  for (std::size_t i = 0; i < intents.size(); ++i) {
    std::string conn;
    if (i > 0) {
      conn = banks_->connectives.at(rng.below(banks_->connectives.size()));
      connectives.push_back(conn);
    }
    const ClauseDraws d = draw(intents[i], style, rng);
    if (i == 0) {
      text = render_with(intents[i], style, d);
      continue;
    }
    const SegmentIntent& it = intents[i];
    if (style.reg == Register::Concise) {
      text += fmt::format(", {} {}", conn, clause(it, style, Form::Keyword, d));
    } else if (conn == "followed by") {
      text += ", followed by " + clause(it, style, Form::Gerund, d);
    } else if (style.reg == Register::Narrative) {
      if (conn == "next") {
        text += ". Next, it " + clause(it, style, Form::Finite, d);
      } else if (conn == "after which") {
        text += ", after which it " + clause(it, style, Form::Finite, d);
      } else {
        text += fmt::format(", {} {}", conn, clause(it, style, Form::Finite, d));
      }
    } else if (conn == "after which") {
      text += ", after which you " + clause(it, style, Form::Imperative, d);
    } else {
      text += fmt::format(", {} {}", conn, clause(it, style, Form::Imperative, d));
    }
  }
  return text;
}

std::string Annotator::summary(std::span<const SegmentIntent> intents, SplitMix64& rng) const {
  const StyleId style{Register::Concise, false};
  std::string text;
  for (std::size_t i = 0; i < intents.size(); ++i) {
    if (i > 0) text += ", ";
    text += clause(intents[i], style, Form::Keyword, draw(intents[i], style, rng));
  }
  return text;
}

AnnotationSet Annotator::render_trajectory(std::span<const SegmentIntent> intents, std::uint64_t seed) const {
  if (intents.empty()) throw EmptyTrajectory("cannot annotate a trajectory with no segments");
  AnnotationSet set;
  set.seed = seed;
  const auto& styles = all_styles();
  for (std::size_t s = 0; s < intents.size(); ++s) {
    std::array<std::string, kStyleCount> row;
    for (std::size_t k = 0; k < kStyleCount; ++k) {
      SplitMix64 rng = SplitMix64::derive(seed, {kSegmentStream, s, k});
      row[k] = render_segment(intents[s], styles[k], rng);
    }
    set.per_segment.push_back(std::move(row));
  }
  for (std::size_t d = 0; d + 1 < kTrajectoryDescriptionCount; ++d) {
    SplitMix64 rng = SplitMix64::derive(seed, {kTrajectoryStream, d});
    TrajectoryDescription desc;
    desc.style = styles[d / 2];
    desc.variant = static_cast<int>(d % 2);
    desc.text = describe(intents, desc.style, rng, desc.connectives);
    set.trajectory.push_back(std::move(desc));
  }
  SplitMix64 rng = SplitMix64::derive(seed, {kTrajectoryStream, kTrajectoryDescriptionCount - 1});
  TrajectoryDescription sum;
  sum.style = {Register::Concise, false};
  sum.variant = -1;
  sum.text = summary(intents, rng);
  set.trajectory.push_back(std::move(sum));
  return set;
}

}  // namespace mocomp
