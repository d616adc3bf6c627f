// mocomp: serve the teleoperation bridge, run the reference backend, generate
// datasets in batch and check packages.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>

#include "mocomp/batch.hpp"
#include "mocomp/dataset.hpp"
#include "mocomp/errors.hpp"
#include "mocomp/service.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Globals {
  std::string registry_path;
  std::string banks_path;
  std::optional<mocomp::Registry> registry;
  std::optional<mocomp::Banks> banks;

  const mocomp::Registry& reg() {
    if (!registry) registry = registry_path.empty() ? mocomp::Registry::builtin() : mocomp::Registry::load(registry_path);
    return *registry;
  }
  const mocomp::Banks& bnk() {
    if (!banks) banks = banks_path.empty() ? mocomp::Banks::builtin() : mocomp::Banks::load(banks_path);
    return *banks;
  }
};

void log_line(const std::string& msg) { std::cerr << msg << std::endl; }

int cmd_serve(Globals& g, const std::string& host, int port, const std::string& backend, const std::string& command_addr,
              const std::string& telemetry_addr, bool record_keyboard, const std::string& out, std::uint64_t seed) {
  mocomp::ServeOptions opts;
  opts.listen = {host, static_cast<std::uint16_t>(port)};
  opts.backend = backend == "external" ? mocomp::BackendKind::External : mocomp::BackendKind::Builtin;
  opts.command_addr = mocomp::Endpoint::parse(command_addr);
  opts.telemetry_addr = mocomp::Endpoint::parse(telemetry_addr);
  opts.record_keyboard = record_keyboard;
  opts.out_dir = out;
  opts.seed = seed;
  opts.handle_signals = true;
  opts.log = log_line;
  mocomp::Service service(g.reg(), g.bnk(), opts);
  service.start();
  std::cout << fmt::format("frontend channel: ws://{}:{}/", host, service.port()) << std::endl;
  if (opts.backend == mocomp::BackendKind::External) {
    std::cout << fmt::format("backend: commands to {}, telemetry from {}", opts.command_addr.str(),
                             opts.telemetry_addr.str())
              << std::endl;
  }
  std::cout << fmt::format("sessions are written to {}", out) << std::endl;
  service.run();
  return kExitOk;
}

int cmd_backend(Globals& g, const std::string& command_addr, const std::string& telemetry_addr, int mode) {
  mocomp::BackendServerOptions opts;
  opts.command_addr = mocomp::Endpoint::parse(command_addr);
  opts.telemetry_addr = mocomp::Endpoint::parse(telemetry_addr);
  opts.initial_mode = g.reg().at(mode).index;
  opts.handle_signals = true;
  opts.log = log_line;
  mocomp::BackendServer server(g.reg(), opts);
  server.start();
  std::cout << fmt::format("reference backend: commands on {}:{}, telemetry on {}:{}", opts.command_addr.host,
                           server.command_port(), opts.telemetry_addr.host, server.telemetry_port())
            << std::endl;
  server.run();
  return kExitOk;
}

int cmd_batch(Globals& g, const std::vector<std::string>& recipe_paths, const std::string& out, std::uint64_t seed,
              const std::string& sweep, bool no_filter, unsigned jobs, double max_jump, double max_height_rate) {
  std::vector<mocomp::Recipe> recipes;
  for (const auto& p : recipe_paths) recipes.push_back(mocomp::load_recipe(p));
  mocomp::BatchOptions opts;
  opts.out_dir = out;
  opts.seed = seed;
  if (!sweep.empty()) opts.sweep = mocomp::SweepSpec::parse(sweep);
  opts.filter = !no_filter;
  opts.jobs = jobs;
  opts.thresholds.max_speed_jump = max_jump;
  opts.thresholds.max_height_rate = max_height_rate;
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    const std::time_t t = static_cast<std::time_t>(std::stoll(epoch));
    opts.created_at = fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(t));
  }
  const auto report = mocomp::run_batch(g.reg(), g.bnk(), recipes, opts);
  for (const auto& run : report.runs) {
    std::string worst;
    for (const auto& t : run.transitions) {
      if (!t.quality) continue;
      worst += fmt::format(" {}->{}: jump {:.3f} m/s, height rate {:.3f} m/s{};", t.from_mode, t.to_mode,
                           t.quality->max_speed_jump, t.quality->max_height_rate, t.quality->pass ? "" : " FAIL");
    }
    std::cout << fmt::format("{} {}{}", run.written ? "wrote   " : "filtered", run.session_id, worst) << "\n";
  }
  std::cout << fmt::format("generated {}, filtered {}; report at {}", report.generated, report.filtered,
                           (std::filesystem::path(out) / "report.json").string())
            << std::endl;
  return kExitOk;
}

int cmd_validate(Globals& g, const std::string& path) {
  const auto pkg = mocomp::read_package(path);
  const auto violations = mocomp::validate(pkg, &g.reg(), &g.bnk());
  if (violations.empty()) {
    std::cout << fmt::format("ok {}: {} segments, {} commands, {} reference / {} executed samples", path,
                             pkg.segments.size(), pkg.commands.size(), pkg.reference.size(), pkg.executed.size())
              << std::endl;
    return kExitOk;
  }
  for (const auto& v : violations) std::cout << to_string(v) << "\n";
  std::cout << fmt::format("{}: {} violation(s)", path, violations.size()) << std::endl;
  return kExitFailure;
}

int cmd_inspect(Globals& g, const std::string& path, bool all_annotations) {
  const auto pkg = mocomp::read_package(path);
  const auto& m = pkg.manifest;
  std::cout << fmt::format("session   {}\ncreated   {}\nrecipe    {}\nseed      {}\nbackend   {}\nregistry  {}\n",
                           m.session_id, m.created_at, m.recipe.name, m.seed, m.backend_name, m.registry_hash);
  std::cout << fmt::format("streams   {} commands, {} reference, {} executed\n\n", pkg.commands.size(),
                           pkg.reference.size(), pkg.executed.size());
  for (std::size_t i = 0; i < pkg.segments.size(); ++i) {
    const auto& s = pkg.segments[i];
    const auto* mode = s.tag.mode >= 0 && static_cast<std::size_t>(s.tag.mode) < g.reg().size() ? &g.reg().at(s.tag.mode)
                                                                                                : nullptr;
    std::cout << fmt::format("#{} [{}, {}) ms  {}  {}", s.tag.index, s.tag.start_ms, s.tag.end_ms,
                             mode ? mode->name : std::to_string(s.tag.mode), mocomp::movement_name(s.intent.movement));
    if (s.intent.turn_deg) std::cout << fmt::format("  turn {:.1f} deg", *s.intent.turn_deg);
    std::cout << fmt::format("  speed {}", s.intent.speed);
    if (s.intent.height) std::cout << fmt::format("  height {}", *s.intent.height);
    std::cout << "\n";
    if (i < pkg.annotations.per_segment.size()) {
      const auto& styles = mocomp::all_styles();
      for (std::size_t k = 0; k < styles.size(); ++k) {
        if (!all_annotations && k > 0) break;
        std::cout << fmt::format("    {:<22} {}\n", mocomp::style_label(styles[k]), pkg.annotations.per_segment[i][k]);
      }
    }
  }
  std::cout << "\n";
  for (const auto& d : pkg.annotations.trajectory) {
    if (!all_annotations && d.variant != 0 && d.variant != -1) continue;
    const std::string label = d.variant < 0 ? "summary" : fmt::format("{}/{}", mocomp::style_label(d.style), d.variant);
    std::cout << fmt::format("  {:<24} {}\n", label, d.text);
  }
  return kExitOk;
}

int cmd_modes(Globals& g) {
  std::cout << fmt::format("{:>3}  {:<16} {:<14} {:<6} {:<8} {:<6}\n", "idx", "mode", "group", "speed", "heading",
                           "height");
  for (const auto& m : g.reg().modes()) {
    std::cout << fmt::format("{:>3}  {:<16} {:<14} {:<6} {:<8} {:<6}\n", m.index, m.name, mocomp::group_name(m.group),
                             m.supports_speed ? "yes" : "-", m.supports_heading ? "yes" : "-",
                             m.supports_height ? "yes" : "-");
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motion primitive composition: teleoperation bridge and dataset generator"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--registry", g.registry_path, "Mode registry file (default: built in)")->check(CLI::ExistingFile);
  app.add_option("--banks", g.banks_path, "Annotation bank file (default: built in)")->check(CLI::ExistingFile);

  auto* serve = app.add_subcommand("serve", "Run the bridge with the frontend channel");
  std::string host = "127.0.0.1";
  int port = 8765;
  std::string backend = "builtin";
  std::string command_addr = "127.0.0.1:9101";
  std::string telemetry_addr = "127.0.0.1:9102";
  bool record_keyboard = true;
  std::string serve_out = "sessions";
  std::uint64_t serve_seed = 0;
  serve->add_option("--host", host, "Frontend listen address");
  serve->add_option("--port", port, "Frontend websocket port")->check(CLI::Range(0, 65535));
  serve->add_option("--backend", backend, "builtin or external")->check(CLI::IsMember({"builtin", "external"}));
  serve->add_option("--command-addr", command_addr, "External backend command endpoint host:port");
  serve->add_option("--telemetry-addr", telemetry_addr, "External backend telemetry endpoint host:port");
  serve->add_flag("--record-keyboard,!--no-record-keyboard", record_keyboard, "Record keyboard sessions (default on)");
  serve->add_option("--out", serve_out, "Directory for recorded session packages");
  serve->add_option("--seed", serve_seed, "Annotation seed");

  auto* be = app.add_subcommand("backend", "Run the reference backend as a standalone process");
  int initial_mode = 1;
  be->add_option("--command-addr", command_addr, "Command listen endpoint host:port");
  be->add_option("--telemetry-addr", telemetry_addr, "Telemetry listen endpoint host:port");
  be->add_option("--mode", initial_mode, "Initial mode index")->check(CLI::Range(0, 24));

  auto* batch = app.add_subcommand("batch", "Generate session packages from recipe files");
  std::vector<std::string> recipes;
  std::string batch_out;
  std::uint64_t batch_seed = 0;
  std::string sweep;
  bool no_filter = false;
  unsigned jobs = 1;
  double max_jump = mocomp::QualityThresholds{}.max_speed_jump;
  double max_height_rate = mocomp::QualityThresholds{}.max_height_rate;
  batch->add_option("--recipes", recipes, "Recipe files")->required()->check(CLI::ExistingFile);
  batch->add_option("--out", batch_out, "Output directory")->required();
  batch->add_option("--seed", batch_seed, "Batch seed")->required();
  batch->add_option("--sweep", sweep, "Parameter sweep, e.g. 'Run.speed=1.5,2,2.5,3'");
  batch->add_flag("--no-filter", no_filter, "Keep runs that fail the transition check");
  batch->add_option("--jobs", jobs, "Worker threads")->check(CLI::Range(1u, 256u));
  batch->add_option("--max-speed-jump", max_jump, "Transition filter: velocity jump threshold, m/s");
  batch->add_option("--max-height-rate", max_height_rate, "Transition filter: pelvis height rate threshold, m/s");

  auto* val = app.add_subcommand("validate", "Check a session package");
  std::string validate_path;
  val->add_option("path", validate_path, "Package directory")->required();

  auto* inspect = app.add_subcommand("inspect", "Summarize a session package");
  std::string inspect_path;
  bool all_annotations = false;
  inspect->add_option("path", inspect_path, "Package directory")->required();
  inspect->add_flag("--all", all_annotations, "Print every annotation");

  auto* modes = app.add_subcommand("modes", "List the mode registry");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (serve->parsed()) {
      return cmd_serve(g, host, port, backend, command_addr, telemetry_addr, record_keyboard, serve_out, serve_seed);
    }
    if (be->parsed()) return cmd_backend(g, command_addr, telemetry_addr, initial_mode);
    if (batch->parsed()) {
      return cmd_batch(g, recipes, batch_out, batch_seed, sweep, no_filter, jobs, max_jump, max_height_rate);
    }
    if (val->parsed()) return cmd_validate(g, validate_path);
    if (inspect->parsed()) return cmd_inspect(g, inspect_path, all_annotations);
    if (modes->parsed()) return cmd_modes(g);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitUsage;
  } catch (const mocomp::ParseError& e) {
    std::cerr << "ParseError: " << e.what() << std::endl;
    return kExitFailure;
  } catch (const mocomp::RegistryLoadError& e) {
    std::cerr << "RegistryLoadError: " << e.what() << std::endl;
    return kExitFailure;
  } catch (const mocomp::InvalidRecipe& e) {
    std::cerr << "InvalidRecipe: " << e.what() << std::endl;
    return kExitFailure;
  } catch (const mocomp::PortInUse& e) {
    std::cerr << "PortInUse: " << e.what() << std::endl;
    return kExitFailure;
  } catch (const mocomp::BackendUnavailable& e) {
    std::cerr << "BackendUnavailable: " << e.what() << std::endl;
    return kExitFailure;
  } catch (const mocomp::Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitFailure;
  }
  return kExitUsage;
}
