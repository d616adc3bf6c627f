#include <sys/wait.h>

#include <cstdlib>

#include <doctest.h>

#include "fixtures.hpp"
#include "mocomp/dataset.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run cli(const std::string& args, const fs::path& scratch) {
  const fs::path log = scratch / "cli.log";
  const std::string cmd = std::string("'") + MOCOMP_CLI_PATH + "' " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = fixtures::read_file(log);
  return r;
}

const std::string kRecipes = MOCOMP_SOURCE_DIR "/data/recipes/";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("batch sweep, determinism and validate exit codes") {
    fixtures::TempDir tmp("cli");
    const auto a = tmp.path() / "a";
    const auto b = tmp.path() / "b";
    const std::string args = "batch --recipes " + kRecipes + "run_sweep.json " + kRecipes +
                             "squat_run_crawl.json --seed 42 --sweep 'Run.speed=1.5,2,2.5,3' --no-filter --out ";
    const Run first = cli(args + "'" + a.string() + "'", tmp.path());
    CHECK(first.code == 0);
    CHECK(first.out.find("generated 8, filtered 0") != std::string::npos);
    CHECK(cli(args + "'" + b.string() + "' --jobs 2", tmp.path()).code == 0);
    CHECK(fixtures::tree_contents(a) == fixtures::tree_contents(b));

    const auto report = nlohmann::json::parse(fixtures::read_file(a / "report.json"));
    CHECK(report["generated"] == 8);
    const auto& chain = report["runs"][4];
    CHECK(chain["recipe"] == "squat-run-elbow-crawl");
    REQUIRE(chain["transitions"].size() == 2);
    CHECK(chain["transitions"][0]["from"] == "Squat");
    CHECK(chain["transitions"][0]["to"] == "Run");
    CHECK(chain["transitions"][1]["to"] == "Elbow Crawl");
    CHECK(chain["transitions"][0]["max_speed_jump"].is_number());

    const std::string pkg = (a / report["runs"][0]["session_id"].get<std::string>()).string();
    const Run ok = cli("validate '" + pkg + "'", tmp.path());
    CHECK(ok.code == 0);
    CHECK(ok.out.rfind("ok ", 0) == 0);
    CHECK(cli("inspect '" + pkg + "'", tmp.path()).code == 0);

    const auto exec = fs::path(pkg) / mocomp::package_files::kExecuted;
    auto lines = fixtures::lines_of(fixtures::read_file(exec));
    lines.resize(lines.size() - 10);
    std::string text;
    for (const auto& l : lines) text += l + "\n";
    fixtures::write_file(exec, text);
    const Run bad = cli("validate '" + pkg + "'", tmp.path());
    CHECK(bad.code == 1);
    CHECK(bad.out.find("count_mismatch") != std::string::npos);

    const Run notpkg = cli("validate '" + a.string() + "'", tmp.path());
    CHECK(notpkg.code == 1);
    CHECK(notpkg.out.find("ParseError") != std::string::npos);
  }

  TEST_CASE("usage errors exit 2") {
    fixtures::TempDir tmp("usage");
    CHECK(cli("", tmp.path()).code == 2);
    CHECK(cli("frobnicate", tmp.path()).code == 2);
    CHECK(cli("batch --out x", tmp.path()).code == 2);
    CHECK(cli("batch --recipes " + kRecipes + "run_sweep.json --seed 1 --sweep 'Run.speed' --out '" +
                  (tmp.path() / "o").string() + "'",
              tmp.path())
              .code == 2);
    CHECK(cli("serve --backend carrier-pigeon", tmp.path()).code == 2);
  }

  TEST_CASE("registry and recipe errors exit 1 with the error name") {
    fixtures::TempDir tmp("errs");
    auto doc = nlohmann::json::parse(fixtures::read_file(MOCOMP_SOURCE_DIR "/data/registry.json"));
    doc["modes"][2]["speed_range"] = {3.0, 1.5};
    fixtures::write_file(tmp.path() / "reg.json", doc.dump());
    const Run r = cli("--registry '" + (tmp.path() / "reg.json").string() + "' modes", tmp.path());
    CHECK(r.code == 1);
    CHECK(r.out.find("RegistryLoadError") != std::string::npos);
    CHECK(r.out.find("Run") != std::string::npos);

    fixtures::write_file(tmp.path() / "bad.json",
                         R"({"name":"bad","segments":[{"mode":"Walk","duration_s":0,"movement":"forward"}]})");
    const Run b = cli("batch --recipes '" + (tmp.path() / "bad.json").string() + "' --seed 1 --out '" +
                          (tmp.path() / "o").string() + "'",
                      tmp.path());
    CHECK(b.code == 1);
    CHECK(b.out.find("InvalidRecipe") != std::string::npos);

    const Run modes = cli("modes", tmp.path());
    CHECK(modes.code == 0);
    CHECK(modes.out.find("Elbow Crawl") != std::string::npos);
  }
}
