#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include <doctest.h>

#include "fixtures.hpp"
#include "mocomp/errors.hpp"
#include "mocomp/planner.hpp"
#include "mocomp/quality.hpp"
#include "mocomp/registry.hpp"

using namespace mocomp;

namespace {

const Registry& reg() { return Registry::builtin(); }

MetaCommand command(int mode, Vec2 move, double speed, double facing_rad = 0.0, double height = 0.74) {
  MetaCommand c;
  c.mode_index = mode;
  c.movement_dir = move;
  c.facing_dir = unit_from_angle(facing_rad);
  c.speed = speed;
  c.pelvis_height = height;
  return c;
}

// Constant-velocity stream along x, optionally with a step in speed at `jump_ms`.
std::vector<TelemetrySample> synthetic(double v0, double v1, std::int64_t jump_ms, double h0 = 0.74, double h1 = 0.74) {
  std::vector<TelemetrySample> out;
  double x = 0.0;
  for (std::int64_t t = 0; t <= 2000; t += 20) {
    TelemetrySample s;
    s.timestamp_ms = t;
    s.base_pos = {x, 0.0, t < jump_ms ? h0 : h1};
    s.pelvis_height = s.base_pos.z;
    out.push_back(s);
    x += (t < jump_ms ? v0 : v1) * 0.02;
  }
  return out;
}

}  // namespace

TEST_SUITE("planner") {
  TEST_CASE("registry matches the motion mode table cell for cell") {
    REQUIRE(reg().size() == fixtures::kTable1.size());
    std::map<std::string, int> groups;
    for (std::size_t i = 0; i < fixtures::kTable1.size(); ++i) {
      const auto& row = fixtures::kTable1[i];
      const ModeSpec& m = reg().at(static_cast<int>(i));
      CAPTURE(row.name);
      CHECK(m.index == static_cast<int>(i));
      CHECK(m.name == row.name);
      CHECK(group_name(m.group) == row.group);
      CHECK(m.supports_speed == row.speed);
      CHECK(m.supports_heading == row.heading);
      CHECK(m.supports_height == row.height);
      CHECK(m.speed_range.has_value() == m.supports_speed);
      CHECK(m.height_range.has_value() == m.supports_height);
      CHECK(m.tempo_bank.empty() == !m.supports_speed);
      CHECK_FALSE(m.verb_bank.empty());
      if (m.speed_range) {
        CHECK(m.speed_range->min < m.speed_range->max);
        CHECK(m.speed_range->contains(m.default_speed));
      }
      ++groups[row.group];
    }
    CHECK(groups.size() == 4);
  }

  TEST_CASE("registry examples") {
    const ModeSpec& run = reg().at(2);
    CHECK(run.name == "Run");
    CHECK(run.supports_speed);
    CHECK(run.supports_heading);
    CHECK_FALSE(run.supports_height);
    CHECK(*run.speed_range == Range{1.5, 3.0});
    CHECK(run.verb_bank == std::vector<std::string>{"run", "sprint", "dash", "jog quickly", "move at full speed"});
    int height_capable = 0;
    for (const auto& m : reg().modes()) height_capable += m.supports_height ? 1 : 0;
    CHECK(height_capable == 5);
    CHECK_THROWS_AS(reg().at(25), UnknownMode);
    CHECK_THROWS_AS(reg().at(-1), UnknownMode);
    CHECK(reg().find_loose("slowwalk") == &reg().at(0));
    CHECK(reg().find_loose("Slow_Walk") == &reg().at(0));
    CHECK(reg().find_loose("kneel two") == &reg().at(7));
    CHECK(reg().find("Slow_Walk") == nullptr);
    CHECK(reg().max_speed() == 3.0);
    CHECK(reg().height_envelope() == Range{0.15, 0.74});
  }

  TEST_CASE("fnv1a reference vectors") {
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
    CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
  }

  TEST_CASE("bad registry documents name the offending entry") {
    const std::string text = fixtures::read_file(MOCOMP_SOURCE_DIR "/data/registry.json");
    auto doc = nlohmann::json::parse(text);
    CHECK_NOTHROW(Registry::from_json(doc.dump()));

    auto broken = doc;
    broken["modes"][9]["speed_range"] = {0.5, 0.1};
    try {
      Registry::from_json(broken.dump());
      FAIL("expected RegistryLoadError");
    } catch (const RegistryLoadError& e) {
      CHECK(std::string(e.what()).find("Hand Crawl") != std::string::npos);
    }

    broken = doc;
    broken["modes"].erase(24);
    CHECK_THROWS_AS(Registry::from_json(broken.dump()), RegistryLoadError);
    broken = doc;
    broken["modes"][3]["verbs"] = nlohmann::json::array();
    CHECK_THROWS_AS(Registry::from_json(broken.dump()), RegistryLoadError);
    CHECK_THROWS_AS(Registry::from_json("{"), RegistryLoadError);
  }

  TEST_CASE("clamp_command") {
    CHECK(clamp_command(reg(), command(2, {1, 0}, 5.0)).speed == 3.0);
    CHECK(clamp_command(reg(), command(2, {1, 0}, 0.2)).speed == 1.5);
    CHECK(clamp_command(reg(), command(1, {1, 0}, 2.0)).speed == reg().at(1).default_speed);
    CHECK(clamp_command(reg(), command(6, {1, 0}, 0.0)).movement_dir == Vec2{0.0, 0.0});
    CHECK(clamp_command(reg(), command(6, {0, 0}, 0.0, 0.0, 0.1)).pelvis_height == 0.3);
    CHECK(clamp_command(reg(), command(1, {0, 0}, 0.0, 0.0, 0.2)).pelvis_height == reg().at(1).default_height);
    MetaCommand bad = command(25, {1, 0}, 1.0);
    CHECK_THROWS_AS(clamp_command(reg(), bad), UnknownMode);

    std::mt19937_64 g(11);
    for (int i = 0; i < 2000; ++i) {
      const MetaCommand c = command(static_cast<int>(g() % 25), unit_from_angle(static_cast<double>(g() % 628) / 100.0),
                                    static_cast<double>(g() % 500) / 100.0, 0.0, 0.01 + static_cast<double>(g() % 100) / 100.0);
      const MetaCommand once = clamp_command(reg(), c);
      CHECK(clamp_command(reg(), once) == once);
    }
  }

  TEST_CASE("zero input keeps the base still") {
    PlannerState s = initial_state(reg(), 1);
    const Vec3 start = s.base_pos;
    for (int i = 0; i < 100; ++i) s = step(reg(), {}, s, clamp_command(reg(), command(1, {0, 0}, 0.0))).state;
    CHECK(s.base_pos == start);
    CHECK(s.gait_phase == 0.0);
    CHECK(s.time_ms == 2000);
  }

  TEST_CASE("constant velocity integrates exactly") {
    // Walk Boxing admits 1.0 m/s, so the commanded speed equals the realized one.
    PlannerState s = initial_state(reg(), 12);
    s.body_vel = {1.0, 0.0};
    const double x0 = s.base_pos.x;
    const MetaCommand c = clamp_command(reg(), command(12, {1, 0}, 1.0));
    REQUIRE(c.speed == 1.0);
    for (int i = 0; i < 50; ++i) s = step(reg(), {}, s, c).state;
    CHECK(std::abs(s.base_pos.x - (x0 + 1.0)) <= 1e-9);
    CHECK(s.base_pos.y == 0.0);
  }

  TEST_CASE("mode switch keeps per-step speed change within a_max dt") {
    const PlannerLimits lim;
    PlannerState s = initial_state(reg(), 1);
    const MetaCommand walk = clamp_command(reg(), command(1, {1, 0}, 0.0));
    const MetaCommand run = clamp_command(reg(), command(2, {1, 0}, 3.0));
    for (int i = 0; i < 100; ++i) s = step(reg(), lim, s, walk).state;
    CHECK(std::abs(s.current_speed() - 1.0) < 1e-12);
    double worst = 0.0;
    for (int i = 0; i < 150; ++i) {
      const PlannerState next = step(reg(), lim, s, run).state;
      worst = std::max(worst, std::abs(next.current_speed() - s.current_speed()));
      CHECK(std::abs(next.base_pos.x - s.base_pos.x) <= next.current_speed() * lim.dt + 1e-12);
      CHECK(next.heading_rad == s.heading_rad);
      CHECK(std::abs(next.pelvis_height - s.pelvis_height) <= lim.max_height_rate * lim.dt + 1e-12);
      s = next;
    }
    CHECK(worst <= lim.max_accel * lim.dt + 1e-9);
    CHECK(s.current_speed() == doctest::Approx(3.0));
    CHECK(s.blend_remaining_s == 0.0);
  }

  TEST_CASE("heading converges monotonically within pi/omega + 1 s") {
    const PlannerLimits lim;
    for (double target : {std::numbers::pi, -2.0, 0.5, 3.0}) {
      PlannerState s = initial_state(reg(), 1);
      const MetaCommand c = command(1, {0, 0}, 0.0, target);
      double err = std::abs(wrap_angle(target - s.heading_rad));
      const int steps = static_cast<int>(std::ceil((std::numbers::pi / lim.max_turn_rate + 1.0) / lim.dt));
      for (int i = 0; i < steps; ++i) {
        s = step(reg(), lim, s, clamp_command(reg(), c)).state;
        const double e = std::abs(wrap_angle(target - s.heading_rad));
        CHECK(e <= err + 1e-12);
        err = e;
      }
      CHECK(err < 1e-3);
    }
  }

  TEST_CASE("modes without heading support hold their heading") {
    PlannerState s = initial_state(reg(), 6);
    s.heading_rad = 0.3;
    for (int i = 0; i < 50; ++i) s = step(reg(), {}, s, clamp_command(reg(), command(6, {1, 0}, 1.0, 2.0, 0.4))).state;
    CHECK(s.heading_rad == 0.3);
    CHECK(s.base_pos.x == 0.0);
  }

  TEST_CASE("speed-less modes settle at their default speed") {
    for (const auto& m : reg().modes()) {
      if (m.supports_speed) continue;
      PlannerState s = initial_state(reg(), m.index);
      const MetaCommand c = clamp_command(reg(), command(m.index, {1, 0}, 2.5));
      for (int i = 0; i < 200; ++i) s = step(reg(), {}, s, c).state;
      CAPTURE(m.name);
      CHECK(s.current_speed() == doctest::Approx(m.supports_heading ? m.default_speed : 0.0).epsilon(1e-12));
    }
  }

  TEST_CASE("step is deterministic and phase stays in [0,1)") {
    std::mt19937_64 g(5);
    PlannerState a = initial_state(reg(), 2);
    PlannerState b = a;
    for (int i = 0; i < 500; ++i) {
      const MetaCommand c = clamp_command(
          reg(), command(static_cast<int>(g() % 25), unit_from_angle(static_cast<double>(g() % 628) / 100.0), 2.0,
                         static_cast<double>(g() % 628) / 100.0 - 3.14, 0.4));
      a = step(reg(), {}, a, c).state;
      b = step(reg(), {}, b, c).state;
      CHECK(a.gait_phase >= 0.0);
      CHECK(a.gait_phase < 1.0);
      CHECK(a.blend_remaining_s <= PlannerLimits{}.blend_time);
      CHECK(reg().height_envelope().contains(a.pelvis_height));
    }
    CHECK(a == b);
  }

  TEST_CASE("transition quality on constructed streams") {
    const auto flat = synthetic(1.0, 1.0, 1000);
    const QualityReport q = transition_quality(flat, 1000);
    CHECK(std::abs(q.max_speed_jump) < 1e-9);
    CHECK(q.pass);

    const auto jump = synthetic(1.0, 2.0, 1000);
    const QualityReport qj = transition_quality(jump, 1000, QualityThresholds{0.2, 0.6, 500});
    CHECK(qj.max_speed_jump == doctest::Approx(1.0).epsilon(1e-9));
    CHECK_FALSE(qj.pass);

    const auto drop = synthetic(0.0, 0.0, 1000, 0.74, 0.5);
    const QualityReport qh = transition_quality(drop, 1000);
    CHECK(qh.max_height_rate == doctest::Approx(0.24 / 0.02));
    CHECK_FALSE(qh.pass);

    std::vector<TelemetrySample> sparse(flat.begin(), flat.begin() + 53);
    CHECK_THROWS_AS(transition_quality(sparse, 1000), WindowTooShort);
    CHECK_NOTHROW(transition_quality(std::vector<TelemetrySample>(flat.begin(), flat.begin() + 56), 1000));
  }

  TEST_CASE("walk to run under blending passes the quality filter") {
    PlannerState s = initial_state(reg(), 1);
    std::vector<TelemetrySample> stream;
    for (int i = 0; i < 150; ++i) {
      const MetaCommand c = clamp_command(reg(), i < 75 ? command(1, {1, 0}, 0.0) : command(2, {1, 0}, 2.0));
      const StepResult r = step(reg(), {}, s, c);
      s = r.state;
      stream.push_back(r.sample);
    }
    const QualityReport q = transition_quality(stream, 1520);
    CHECK(q.pass);
    CHECK(q.max_speed_jump <= PlannerLimits{}.max_accel * PlannerLimits{}.dt + 1e-9);
  }
}
