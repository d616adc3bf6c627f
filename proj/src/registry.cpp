#include "mocomp/registry.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "embedded_data.hpp"
#include "mocomp/errors.hpp"

namespace mocomp {

using nlohmann::json;

std::string_view group_name(ModeGroup g) {
  switch (g) {
    case ModeGroup::Locomotion: return "Locomotion";
    case ModeGroup::SquatGround: return "SquatGround";
    case ModeGroup::Boxing: return "Boxing";
    case ModeGroup::StyledWalking: return "StyledWalking";
  }
  return "?";
}

namespace {

std::optional<ModeGroup> parse_group(std::string_view s) {
  for (auto g : {ModeGroup::Locomotion, ModeGroup::SquatGround, ModeGroup::Boxing, ModeGroup::StyledWalking}) {
    if (group_name(g) == s) return g;
  }
  return std::nullopt;
}

std::optional<Range> parse_range(const json& entry, const char* key, const std::string& where) {
  if (!entry.contains(key)) return std::nullopt;
  const auto& r = entry.at(key);
  if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number()) {
    throw RegistryLoadError(fmt::format("{}: '{}' must be [min, max]", where, key));
  }
  Range out{r[0].get<double>(), r[1].get<double>()};
  if (!(out.min < out.max)) throw RegistryLoadError(fmt::format("{}: '{}' needs min < max", where, key));
  return out;
}

std::vector<std::string> parse_strings(const json& entry, const char* key, const std::string& where) {
  if (!entry.contains(key)) return {};
  const auto& a = entry.at(key);
  if (!a.is_array()) throw RegistryLoadError(fmt::format("{}: '{}' must be a list", where, key));
  std::vector<std::string> out;
  for (const auto& s : a) {
    if (!s.is_string() || s.get<std::string>().empty()) {
      throw RegistryLoadError(fmt::format("{}: '{}' must hold non-empty strings", where, key));
    }
    out.push_back(s.get<std::string>());
  }
  return out;
}

ModeSpec parse_mode(const json& entry, std::size_t position) {
  std::string where = fmt::format("mode entry {}", position);
  if (!entry.is_object()) throw RegistryLoadError(where + ": not an object");
  try {
    ModeSpec m;
    m.name = entry.at("name").get<std::string>();
    where += fmt::format(" ('{}')", m.name);
    m.index = entry.at("index").get<int>();
    const auto group = parse_group(entry.at("group").get<std::string>());
    if (!group) throw RegistryLoadError(where + ": unknown group");
    m.group = *group;
    m.supports_speed = entry.at("speed").get<bool>();
    m.supports_heading = entry.at("heading").get<bool>();
    m.supports_height = entry.at("height").get<bool>();
    m.speed_range = parse_range(entry, "speed_range", where);
    m.height_range = parse_range(entry, "height_range", where);
    m.default_speed = entry.at("default_speed").get<double>();
    m.default_height = entry.at("default_height").get<double>();
    m.gait_frequency = entry.at("gait_frequency").get<double>();
    m.verb_bank = parse_strings(entry, "verbs", where);
    m.tempo_bank = parse_strings(entry, "tempo", where);

    if (m.index != static_cast<int>(position)) {
      throw RegistryLoadError(fmt::format("{}: index {} out of order", where, m.index));
    }
    if (m.supports_speed != m.speed_range.has_value()) {
      throw RegistryLoadError(where + ": speed_range must be present iff speed is supported");
    }
    if (m.supports_height != m.height_range.has_value()) {
      throw RegistryLoadError(where + ": height_range must be present iff height is supported");
    }
    if (m.supports_speed != !m.tempo_bank.empty()) {
      throw RegistryLoadError(where + ": tempo bank must be present iff speed is supported");
    }
    if (m.speed_range && !m.speed_range->contains(m.default_speed)) {
      throw RegistryLoadError(where + ": default_speed outside speed_range");
    }
    if (m.height_range && !m.height_range->contains(m.default_height)) {
      throw RegistryLoadError(where + ": default_height outside height_range");
    }
    if (m.default_speed < 0.0 || m.default_height <= 0.0 || m.gait_frequency < 0.0) {
      throw RegistryLoadError(where + ": defaults must be non-negative (height positive)");
    }
    if (m.verb_bank.empty()) throw RegistryLoadError(where + ": verb bank is empty");
    return m;
  } catch (const json::exception& e) {
    throw RegistryLoadError(fmt::format("{}: {}", where, e.what()));
  }
}

}  // namespace

Registry Registry::from_json(std::string_view text) {
  const json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw RegistryLoadError("registry is not valid JSON");
  if (!doc.is_object() || !doc.contains("modes") || !doc["modes"].is_array()) {
    throw RegistryLoadError("registry needs a 'modes' list");
  }
  Registry reg;
  const auto& modes = doc["modes"];
  std::set<std::string> names;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    ModeSpec m = parse_mode(modes[i], i);
    if (!names.insert(m.name).second) {
      throw RegistryLoadError(fmt::format("mode entry {} ('{}'): duplicate name", i, m.name));
    }
    reg.modes_.push_back(std::move(m));
  }
  if (reg.modes_.size() != static_cast<std::size_t>(25)) {
    throw RegistryLoadError(fmt::format("registry lists {} modes, expected 25", reg.modes_.size()));
  }

  bool any = false;
  for (const auto& m : reg.modes_) {
    if (!m.height_range) continue;
    if (!any) {
      reg.height_envelope_ = *m.height_range;
      any = true;
    } else {
      reg.height_envelope_.min = std::min(reg.height_envelope_.min, m.height_range->min);
      reg.height_envelope_.max = std::max(reg.height_envelope_.max, m.height_range->max);
    }
  }
  if (!any) throw RegistryLoadError("no mode supports height");
  for (const auto& m : reg.modes_) {
    if (!reg.height_envelope_.contains(m.default_height)) {
      throw RegistryLoadError(
          fmt::format("mode entry {} ('{}'): default_height outside the height envelope", m.index, m.name));
    }
  }
  reg.canonical_ = doc["modes"].dump();
  return reg;
}

Registry Registry::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RegistryLoadError("cannot open registry file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

const Registry& Registry::builtin() {
  static const Registry reg = from_json(embedded::kRegistryJson);
  return reg;
}

const ModeSpec& Registry::at(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= modes_.size()) {
    throw UnknownMode(fmt::format("mode index {} outside [0, {}]", index, modes_.size() - 1));
  }
  return modes_[static_cast<std::size_t>(index)];
}

const ModeSpec* Registry::find(std::string_view exact_name) const {
  for (const auto& m : modes_) {
    if (m.name == exact_name) return &m;
  }
  return nullptr;
}

const ModeSpec* Registry::find_loose(std::string_view key) const {
  const std::string k = normalize_mode_key(key);
  for (const auto& m : modes_) {
    if (normalize_mode_key(m.name) == k) return &m;
  }
  return nullptr;
}

double Registry::max_speed() const {
  double v = 0.0;
  for (const auto& m : modes_) v = std::max(v, m.speed_range ? m.speed_range->max : m.default_speed);
  return v;
}

std::string normalize_mode_key(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace mocomp
