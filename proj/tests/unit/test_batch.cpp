#include <regex>

#include <doctest.h>

#include "fixtures.hpp"
#include "mocomp/batch.hpp"
#include "mocomp/dataset.hpp"
#include "mocomp/errors.hpp"

using namespace mocomp;

namespace {

const Registry& reg() { return Registry::builtin(); }
const Banks& banks() { return Banks::builtin(); }

SegmentSpec seg(const char* mode, double duration, Movement mv = Movement::Forward) {
  SegmentSpec s;
  s.mode = std::string(mode);
  s.duration_s = duration;
  s.movement = mv;
  return s;
}

Recipe chain() {
  Recipe r;
  r.name = "Squat Run Crawl";
  r.seed = 11;
  r.segments = {seg("Squat", 2.0, Movement::None), seg("Run", 3.0), seg("Elbow Crawl", 3.0)};
  return r;
}

Recipe run_recipe() {
  Recipe r;
  r.name = "run sweep";
  r.seed = 5;
  r.segments = {seg("Walk", 2.0), seg("Run", 4.0), seg("Walk", 2.0)};
  return r;
}

// Every Run tempo phrase replaced by a placeholder.
std::string mask_run_tempo(std::string text) {
  for (const auto& t : reg().at(2).tempo_bank) {
    for (auto pos = text.find(t); pos != std::string::npos; pos = text.find(t, pos)) text.replace(pos, t.size(), "<TEMPO>");
  }
  return text;
}

}  // namespace

TEST_SUITE("batch") {
  TEST_CASE("sweep grammar") {
    const SweepSpec s = SweepSpec::parse("Run.speed=1.5,2,2.5,3");
    REQUIRE(s.clauses.size() == 1);
    CHECK(s.clauses[0].selector == SweepClause::Selector::Mode);
    CHECK(s.clauses[0].mode_key == normalize_mode_key("Run"));
    CHECK(s.clauses[0].values == std::vector<double>{1.5, 2.0, 2.5, 3.0});
    CHECK(s.point_count() == 4);

    const SweepSpec two = SweepSpec::parse(" #1.duration = 1,2 ; *.speed=0.5,0.6,0.7 ");
    CHECK(two.point_count() == 6);
    CHECK(two.clauses[0].selector == SweepClause::Selector::Index);
    CHECK(two.clauses[0].segment_index == 1);
    CHECK(two.clauses[1].selector == SweepClause::Selector::All);
    // First clause varies slowest.
    CHECK(two.point(0) == std::vector<std::pair<std::size_t, double>>{{0, 1.0}, {1, 0.5}});
    CHECK(two.point(2) == std::vector<std::pair<std::size_t, double>>{{0, 1.0}, {1, 0.7}});
    CHECK(two.point(3) == std::vector<std::pair<std::size_t, double>>{{0, 2.0}, {1, 0.5}});

    for (const char* bad : {"", "Run.speed", "Run=1", "Run.colour=1", "Run.speed=", "Run.speed=fast", "#x.speed=1",
                            "#-1.speed=1", ".speed=1"}) {
      CAPTURE(bad);
      CHECK_THROWS_AS(SweepSpec::parse(bad), std::invalid_argument);
    }
  }

  TEST_CASE("sweep application respects selectors and capabilities") {
    Recipe r = run_recipe();
    r.segments.push_back(seg("Hand Crawl", 1.0));
    const Recipe speeds = SweepSpec::parse("*.speed=0.4").apply(reg(), r, 0);
    CHECK_FALSE(speeds.segments[0].speed.has_value());
    CHECK(speeds.segments[1].speed == 0.4);
    CHECK(speeds.segments[3].speed == 0.4);
    const Recipe run = SweepSpec::parse("run.speed=2.5").apply(reg(), r, 0);
    CHECK(run.segments[1].speed == 2.5);
    CHECK_FALSE(run.segments[3].speed.has_value());
    const Recipe idx = SweepSpec::parse("#2.duration=0.5").apply(reg(), r, 0);
    CHECK(idx.segments[2].duration_s == 0.5);
    CHECK(idx.segments[0].duration_s == 2.0);
  }

  TEST_CASE("4-point Run speed sweep differs only in tempo and kinematics") {
    fixtures::TempDir tmp("sweep");
    BatchOptions o;
    o.out_dir = tmp.path();
    o.seed = 9;
    o.sweep = SweepSpec::parse("Run.speed=1.5,2,2.5,3");
    const BatchReport rep = run_batch(reg(), banks(), {run_recipe()}, o);
    CHECK(rep.generated == 4);
    CHECK(rep.filtered == 0);
    REQUIRE(rep.runs.size() == 4);

    std::vector<std::string> masked;
    std::vector<std::string> raw;
    std::vector<std::string> reference;
    std::vector<std::string> manifests;
    for (const auto& run : rep.runs) {
      CHECK(run.written);
      CHECK(std::regex_match(run.session_id, std::regex("r00-run-sweep-p00[0-3]")));
      const auto dir = tmp.path() / run.session_id;
      const SessionPackage pkg = load_package(dir, &reg(), &banks());
      CHECK(pkg.manifest.seed == run_seed(9, run_recipe()));
      const std::string ann = fixtures::read_file(dir / package_files::kAnnotations);
      raw.push_back(ann);
      masked.push_back(mask_run_tempo(ann));
      reference.push_back(fixtures::read_file(dir / package_files::kReference));
      auto m = nlohmann::json::parse(fixtures::read_file(dir / package_files::kManifest));
      m.erase("session_id");
      m["recipe"]["segments"][1].erase("speed");
      manifests.push_back(m.dump());
    }
    const std::vector<std::string> expected_tempo = {"at a jog", "at a brisk pace", "quickly", "at full speed"};
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(masked[i] == masked[0]);
      CHECK(manifests[i] == manifests[0]);
      CHECK(raw[i].find(expected_tempo[i]) != std::string::npos);
      for (std::size_t j = i + 1; j < 4; ++j) {
        CHECK(raw[i] != raw[j]);
        CHECK(reference[i] != reference[j]);
      }
    }
  }

  TEST_CASE("batch output trees are identical across runs and job counts") {
    fixtures::TempDir a("det-a");
    fixtures::TempDir b("det-b");
    BatchOptions o;
    o.seed = 77;
    o.sweep = SweepSpec::parse("Run.speed=1.5,3");
    o.out_dir = a.path();
    run_batch(reg(), banks(), {run_recipe(), chain()}, o);
    o.out_dir = b.path();
    o.jobs = 3;
    run_batch(reg(), banks(), {run_recipe(), chain()}, o);
    CHECK(fixtures::tree_contents(a.path()) == fixtures::tree_contents(b.path()));
  }

  TEST_CASE("transition report for a Squat to Run to Elbow Crawl chain") {
    fixtures::TempDir tmp("chain");
    BatchOptions o;
    o.out_dir = tmp.path();
    o.filter = false;
    const BatchReport rep = run_batch(reg(), banks(), {chain()}, o);
    REQUIRE(rep.runs.size() == 1);
    const auto& t = rep.runs[0].transitions;
    REQUIRE(t.size() == 2);
    CHECK(t[0].from_mode == "Squat");
    CHECK(t[0].to_mode == "Run");
    CHECK(t[0].switch_ms == 2000);
    CHECK(t[1].to_mode == "Elbow Crawl");
    CHECK(t[1].switch_ms == 5000);
    for (const auto& x : t) {
      REQUIRE(x.quality.has_value());
      CHECK(x.quality->max_speed_jump >= 0.0);
      CHECK(x.quality->max_height_rate >= 0.0);
    }
    const auto j = nlohmann::json::parse(fixtures::read_file(tmp.path() / "report.json"));
    CHECK(j["generated"] == 1);
    CHECK(j["runs"][0]["transitions"].size() == 2);
    CHECK(j["runs"][0]["transitions"][0].contains("max_speed_jump"));
    CHECK(j["runs"][0]["transitions"][1].contains("max_height_rate"));
  }

  TEST_CASE("the quality filter drops runs and keeps them in the report") {
    fixtures::TempDir tmp("filter");
    BatchOptions o;
    o.out_dir = tmp.path();
    o.thresholds.max_height_rate = 0.1;
    Recipe level;
    level.name = "level";
    level.segments = {seg("Walk", 2.0), seg("Happy", 2.0)};
    const BatchReport rep = run_batch(reg(), banks(), {chain(), level}, o);
    CHECK(rep.filtered == 1);
    CHECK(rep.generated == 1);
    CHECK_FALSE(rep.runs[0].passed);
    CHECK_FALSE(std::filesystem::exists(tmp.path() / rep.runs[0].session_id));
    CHECK(std::filesystem::exists(tmp.path() / rep.runs[1].session_id));

    o.filter = false;
    const BatchReport all = run_batch(reg(), banks(), {chain()}, o);
    CHECK(all.generated == 1);
    CHECK_FALSE(all.runs[0].passed);
  }

  TEST_CASE("sweeps that leave the valid range are rejected up front") {
    fixtures::TempDir tmp("bad");
    BatchOptions o;
    o.out_dir = tmp.path() / "out";
    o.sweep = SweepSpec::parse("Run.speed=2,5");
    CHECK_THROWS_AS(run_batch(reg(), banks(), {run_recipe()}, o), InvalidRecipe);
    CHECK_FALSE(std::filesystem::exists(o.out_dir / "report.json"));
  }
}
