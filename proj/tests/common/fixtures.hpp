#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <numbers>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mocomp/protocol.hpp"
#include "mocomp/recipe.hpp"
#include "mocomp/registry.hpp"

namespace fixtures {

namespace fs = std::filesystem;

struct Table1Row {
  const char* group;
  const char* name;
  bool speed;
  bool heading;
  bool height;
};

// Transcribed cell by cell from the motion mode table.
inline constexpr std::array<Table1Row, 25> kTable1{{
    {"Locomotion", "Slow Walk", true, true, false},
    {"Locomotion", "Walk", false, true, false},
    {"Locomotion", "Run", true, true, false},
    {"Locomotion", "Happy", false, true, false},
    {"Locomotion", "Stealth", false, true, false},
    {"Locomotion", "Injured", false, true, false},
    {"SquatGround", "Squat", false, false, true},
    {"SquatGround", "Kneel (Two)", false, false, true},
    {"SquatGround", "Kneel (One)", false, false, true},
    {"SquatGround", "Hand Crawl", true, true, true},
    {"SquatGround", "Elbow Crawl", true, true, true},
    {"Boxing", "Idle Boxing", false, true, false},
    {"Boxing", "Walk Boxing", true, true, false},
    {"Boxing", "Left Jab", true, true, false},
    {"Boxing", "Right Jab", true, true, false},
    {"Boxing", "Random Punches", true, true, false},
    {"Boxing", "Left Hook", true, true, false},
    {"Boxing", "Right Hook", true, true, false},
    {"StyledWalking", "Careful", false, true, false},
    {"StyledWalking", "Object Carrying", false, true, false},
    {"StyledWalking", "Crouch", false, true, false},
    {"StyledWalking", "Happy Dance", false, true, false},
    {"StyledWalking", "Zombie", false, true, false},
    {"StyledWalking", "Point", false, true, false},
    {"StyledWalking", "Scared", false, true, false},
}};

inline bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

inline bool field_exact(const mocomp::MetaCommand& a, const mocomp::MetaCommand& b) {
  return a.timestamp_ms == b.timestamp_ms && a.mode_index == b.mode_index && same_bits(a.movement_dir.x, b.movement_dir.x) &&
         same_bits(a.movement_dir.y, b.movement_dir.y) && same_bits(a.facing_dir.x, b.facing_dir.x) &&
         same_bits(a.facing_dir.y, b.facing_dir.y) && same_bits(a.speed, b.speed) &&
         same_bits(a.pelvis_height, b.pelvis_height);
}

inline bool field_exact(const mocomp::TelemetrySample& a, const mocomp::TelemetrySample& b) {
  if (a.joints.size() != b.joints.size()) return false;
  for (std::size_t i = 0; i < a.joints.size(); ++i) {
    if (!same_bits(a.joints[i], b.joints[i])) return false;
  }
  return a.timestamp_ms == b.timestamp_ms && a.mode_index == b.mode_index && same_bits(a.base_pos.x, b.base_pos.x) &&
         same_bits(a.base_pos.y, b.base_pos.y) && same_bits(a.base_pos.z, b.base_pos.z) &&
         same_bits(a.heading_rad, b.heading_rad) && same_bits(a.base_vel.x, b.base_vel.x) &&
         same_bits(a.base_vel.y, b.base_vel.y) && same_bits(a.pelvis_height, b.pelvis_height) &&
         same_bits(a.gait_phase, b.gait_phase);
}

// Mixes ordinary magnitudes with awkward bit patterns.
inline double wild(std::mt19937_64& g) {
  switch (g() % 6) {
    case 0: return std::uniform_real_distribution<double>(-5.0, 5.0)(g);
    case 1: return std::ldexp(std::uniform_real_distribution<double>(-1.0, 1.0)(g), -1060);  // subnormal
    case 2: return std::uniform_real_distribution<double>(-1e300, 1e300)(g);
    case 3: return -0.0;
    case 4: return 0.1 * static_cast<double>(g() % 1000);
    default: {
      double v;
      do v = std::bit_cast<double>(g()); while (!std::isfinite(v));
      return v;
    }
  }
}


inline mocomp::MetaCommand random_command(std::mt19937_64& g) {
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  mocomp::MetaCommand c;
  c.timestamp_ms = static_cast<std::int64_t>(g() >> 2);
  c.mode_index = static_cast<int>(g() % mocomp::kModeCount);
  c.movement_dir = (g() % 3 == 0) ? mocomp::Vec2{0.0, 0.0} : mocomp::unit_from_angle(angle(g));
  c.facing_dir = mocomp::unit_from_angle(angle(g));
  c.speed = std::abs(wild(g));
  do c.pelvis_height = std::abs(wild(g)); while (c.pelvis_height == 0.0);
  return c;
}

inline mocomp::TelemetrySample random_sample(std::mt19937_64& g) {
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  mocomp::TelemetrySample s;
  s.timestamp_ms = static_cast<std::int64_t>(g() >> 1);
  s.mode_index = static_cast<int>(g() % mocomp::kModeCount);
  s.base_pos = {wild(g), wild(g), wild(g)};
  do s.heading_rad = angle(g); while (s.heading_rad == -std::numbers::pi);
  s.base_vel = {wild(g), wild(g)};
  s.pelvis_height = wild(g);
  s.gait_phase = std::uniform_real_distribution<double>(0.0, 1.0)(g);
  s.joints.resize(g() % 30);
  for (auto& q : s.joints) q = wild(g);
  return s;
}

// A valid recipe of 1..max_segments short segments exercising every optional field.
inline mocomp::Recipe random_recipe(const mocomp::Registry& registry, std::mt19937_64& gen, int max_segments = 4) {
  std::uniform_int_distribution<int> nseg(1, max_segments);
  std::uniform_int_distribution<int> mode_d(0, static_cast<int>(registry.size()) - 1);
  std::uniform_int_distribution<int> dur_cs(15, 250);  // centiseconds
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  mocomp::Recipe r;
  r.name = "random";
  r.seed = gen();
  const int n = nseg(gen);
  for (int i = 0; i < n; ++i) {
    const auto& mode = registry.at(mode_d(gen));
    mocomp::SegmentSpec s;
    s.mode = unit(gen) < 0.5 ? mocomp::ModeRef{mode.index} : mocomp::ModeRef{mode.name};
    s.duration_s = dur_cs(gen) / 100.0;
    if (mode.supports_heading) {
      s.movement = static_cast<mocomp::Movement>(std::uniform_int_distribution<int>(0, 6)(gen));
      const bool turning = s.movement == mocomp::Movement::TurnLeft || s.movement == mocomp::Movement::TurnRight;
      if (s.duration_s >= 0.3 && (turning || unit(gen) < 0.3)) {
        double deg = std::round(unit(gen) * 180.0);
        if (s.movement == mocomp::Movement::TurnRight || (!turning && unit(gen) < 0.5)) deg = -deg;
        s.turn_deg = deg;
      }
    }
    if (mode.supports_speed && unit(gen) < 0.6) {
      s.speed = mode.speed_range->min + unit(gen) * (mode.speed_range->max - mode.speed_range->min);
    }
    if (mode.supports_height && unit(gen) < 0.6) {
      s.height = mode.height_range->min + unit(gen) * (mode.height_range->max - mode.height_range->min);
    }
    r.segments.push_back(s);
  }
  return r;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

// Relative path -> content for every regular file under `root`, sorted.
inline std::vector<std::pair<std::string, std::string>> tree_contents(const fs::path& root) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out.emplace_back(fs::relative(e.path(), root).generic_string(), read_file(e.path()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("mocomp-" + tag + "-" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

}  // namespace fixtures
