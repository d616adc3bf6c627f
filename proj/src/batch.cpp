#include "mocomp/batch.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

#include "mocomp/dataset.hpp"
#include "mocomp/errors.hpp"
#include "mocomp/rng.hpp"
#include "mocomp/runner.hpp"

namespace mocomp {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto at = s.find(sep, pos);
    out.push_back(s.substr(pos, at == std::string_view::npos ? std::string_view::npos : at - pos));
    if (at == std::string_view::npos) break;
    pos = at + 1;
  }
  return out;
}

double parse_number(std::string_view s, std::string_view clause) {
  s = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw std::invalid_argument(fmt::format("sweep clause '{}': '{}' is not a number", clause, s));
  }
  return v;
}

std::string slug(std::string_view name) {
  std::string out;
  for (char c : name) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!out.empty() && out.back() != '-') {
      out += '-';
    }
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out.empty() ? "recipe" : out;
}

bool capable(const ModeSpec& m, const std::string& field) {
  if (field == "speed") return m.supports_speed;
  if (field == "height") return m.supports_height;
  if (field == "turn_deg") return m.supports_heading;
  return true;
}

void set_field(SegmentSpec& seg, const std::string& field, double v) {
  if (field == "speed") {
    seg.speed = v;
  } else if (field == "height") {
    seg.height = v;
  } else if (field == "turn_deg") {
    seg.turn_deg = v;
  } else {
    seg.duration_s = v;
  }
}

struct Task {
  std::size_t recipe_index;
  std::size_t point_index;
  Recipe recipe;
};

RunReport run_one(const Registry& registry, const Banks& banks, const Task& task, const std::string& original_name,
                  std::uint64_t seed, const BatchOptions& options, const SweepSpec* sweep) {
  RunReport rep;
  rep.recipe = original_name;
  rep.recipe_index = task.recipe_index;
  rep.point_index = task.point_index;
  if (sweep != nullptr) rep.sweep_values = sweep->point(task.point_index);
  rep.session_id = fmt::format("r{:02d}-{}-p{:03d}", task.recipe_index, slug(original_name), task.point_index);

  RunOptions ro;
  ro.limits = options.limits;
  ro.session_id = rep.session_id;
  Recording rec = execute_recipe(registry, task.recipe, ro);

  for (std::size_t i = 1; i < rec.segments.size(); ++i) {
    TransitionStats ts;
    ts.segment = static_cast<int>(i);
    ts.from_mode = registry.at(rec.segments[i - 1].mode).name;
    ts.to_mode = registry.at(rec.segments[i].mode).name;
    ts.switch_ms = rec.segments[i].start_ms;
    try {
      ts.quality = transition_quality(rec.executed, ts.switch_ms, options.thresholds);
      if (!ts.quality->pass) rep.passed = false;
    } catch (const WindowTooShort&) {
      ts.quality.reset();
    }
    rep.transitions.push_back(std::move(ts));
  }
  if (options.filter && !rep.passed) return rep;

  SessionPackage pkg = make_package(registry, banks, rec, AnnotationSet{}, options.created_at);
  std::vector<SegmentIntent> intents;
  for (const auto& s : pkg.segments) intents.push_back(s.intent);
  pkg.annotations = Annotator(registry, banks).render_trajectory(intents, seed);
  pkg.manifest.seed = seed;
  write_package(pkg, options.out_dir / rep.session_id);
  rep.written = true;
  return rep;
}

}  // namespace

SweepSpec SweepSpec::parse(std::string_view text) {
  SweepSpec spec;
  for (std::string_view raw : split(text, ';')) {
    const std::string_view clause = trim(raw);
    if (clause.empty()) continue;
    const auto eq = clause.find('=');
    if (eq == std::string_view::npos) throw std::invalid_argument(fmt::format("sweep clause '{}': missing '='", clause));
    const std::string_view lhs = trim(clause.substr(0, eq));
    const auto dot = lhs.rfind('.');
    if (dot == std::string_view::npos) {
      throw std::invalid_argument(fmt::format("sweep clause '{}': expected selector.field", clause));
    }
    SweepClause c;
    const std::string_view sel = trim(lhs.substr(0, dot));
    c.field = std::string(trim(lhs.substr(dot + 1)));
    if (c.field != "speed" && c.field != "height" && c.field != "turn_deg" && c.field != "duration") {
      throw std::invalid_argument(fmt::format("sweep clause '{}': unknown field '{}'", clause, c.field));
    }
    if (sel == "*") {
      c.selector = SweepClause::Selector::All;
    } else if (!sel.empty() && sel.front() == '#') {
      c.selector = SweepClause::Selector::Index;
      const double idx = parse_number(sel.substr(1), clause);
      if (idx < 0 || idx != std::floor(idx)) {
        throw std::invalid_argument(fmt::format("sweep clause '{}': bad segment index", clause));
      }
      c.segment_index = static_cast<int>(idx);
    } else {
      c.selector = SweepClause::Selector::Mode;
      c.mode_key = normalize_mode_key(sel);
      if (c.mode_key.empty()) throw std::invalid_argument(fmt::format("sweep clause '{}': empty selector", clause));
    }
    for (std::string_view v : split(clause.substr(eq + 1), ',')) c.values.push_back(parse_number(v, clause));
    spec.clauses.push_back(std::move(c));
  }
  if (spec.clauses.empty()) throw std::invalid_argument("sweep spec has no clauses");
  return spec;
}

std::size_t SweepSpec::point_count() const {
  std::size_t n = 1;
  for (const auto& c : clauses) n *= c.values.size();
  return n;
}

std::vector<std::pair<std::size_t, double>> SweepSpec::point(std::size_t p) const {
  std::vector<std::pair<std::size_t, double>> out(clauses.size());
  for (std::size_t i = clauses.size(); i-- > 0;) {
    const auto& vals = clauses[i].values;
    out[i] = {i, vals[p % vals.size()]};
    p /= vals.size();
  }
  return out;
}

Recipe SweepSpec::apply(const Registry& registry, const Recipe& recipe, std::size_t p) const {
  Recipe out = recipe;
  for (const auto& [ci, value] : point(p)) {
    const SweepClause& c = clauses[ci];
    for (std::size_t i = 0; i < out.segments.size(); ++i) {
      auto& seg = out.segments[i];
      const ModeSpec& mode = registry.at(resolve_mode(registry, seg.mode));
      switch (c.selector) {
        case SweepClause::Selector::All:
          if (capable(mode, c.field)) set_field(seg, c.field, value);
          break;
        case SweepClause::Selector::Index:
          if (static_cast<int>(i) == c.segment_index) set_field(seg, c.field, value);
          break;
        case SweepClause::Selector::Mode:
          if (normalize_mode_key(mode.name) == c.mode_key) set_field(seg, c.field, value);
          break;
      }
    }
  }
  return out;
}

std::uint64_t run_seed(std::uint64_t batch_seed, const Recipe& recipe) {
  return SplitMix64::derive(batch_seed, {recipe.seed}).next();
}

ordered_json report_to_json(const BatchReport& report) {
  ordered_json j;
  j["generated"] = report.generated;
  j["filtered"] = report.filtered;
  j["runs"] = ordered_json::array();
  for (const auto& r : report.runs) {
    ordered_json run;
    run["session_id"] = r.session_id;
    run["recipe"] = r.recipe;
    run["recipe_index"] = r.recipe_index;
    run["point_index"] = r.point_index;
    run["sweep"] = ordered_json::array();
    for (const auto& [ci, v] : r.sweep_values) run["sweep"].push_back({{"clause", ci}, {"value", v}});
    run["passed"] = r.passed;
    run["written"] = r.written;
    run["transitions"] = ordered_json::array();
    for (const auto& t : r.transitions) {
      ordered_json tj;
      tj["segment"] = t.segment;
      tj["from"] = t.from_mode;
      tj["to"] = t.to_mode;
      tj["switch_ms"] = t.switch_ms;
      if (t.quality) {
        tj["max_speed_jump"] = t.quality->max_speed_jump;
        tj["max_height_rate"] = t.quality->max_height_rate;
        tj["pass"] = t.quality->pass;
      } else {
        tj["pass"] = nullptr;
      }
      run["transitions"].push_back(std::move(tj));
    }
    j["runs"].push_back(std::move(run));
  }
  return j;
}

BatchReport run_batch(const Registry& registry, const Banks& banks, const std::vector<Recipe>& recipes,
                      const BatchOptions& options) {
  const SweepSpec* sweep = options.sweep ? &*options.sweep : nullptr;
  const std::size_t points = sweep != nullptr ? sweep->point_count() : 1;

  std::vector<Task> tasks;
  for (std::size_t ri = 0; ri < recipes.size(); ++ri) {
    for (std::size_t pi = 0; pi < points; ++pi) {
      Recipe r = sweep != nullptr ? sweep->apply(registry, recipes[ri], pi) : recipes[ri];
      try {
        validate_recipe(registry, r);
      } catch (const InvalidRecipe& e) {
        throw InvalidRecipe(fmt::format("recipe '{}' (sweep point {}): {}", recipes[ri].name, pi, e.what()));
      }
      tasks.push_back({ri, pi, std::move(r)});
    }
  }

  std::error_code ec;
  fs::create_directories(options.out_dir, ec);
  if (ec) throw IoError(fmt::format("cannot create {}: {}", options.out_dir.string(), ec.message()));

  std::vector<RunReport> results(tasks.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        const Task& t = tasks[i];
        const Recipe& original = recipes[t.recipe_index];
        results[i] = run_one(registry, banks, t, original.name, run_seed(options.seed, original), options, sweep);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(tasks.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < jobs; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  BatchReport report;
  for (auto& r : results) {
    if (r.written) {
      ++report.generated;
    } else {
      ++report.filtered;
    }
    report.runs.push_back(std::move(r));
  }
  std::ofstream out(options.out_dir / "report.json", std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write report.json");
  out << report_to_json(report).dump(2) << "\n";
  if (!out) throw IoError("short write to report.json");
  return report;
}

}  // namespace mocomp
