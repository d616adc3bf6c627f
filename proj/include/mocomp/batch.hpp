#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mocomp/annotation.hpp"
#include "mocomp/planner.hpp"
#include "mocomp/quality.hpp"
#include "mocomp/recipe.hpp"
#include "mocomp/registry.hpp"

namespace mocomp {

// Parameter sweeps over recipe segments.
//
//   spec   := clause (';' clause)*
//   clause := selector '.' field '=' value (',' value)*
//   selector := '*' | '#' index | mode-name      (mode names match loosely)
//   field  := speed | height | turn_deg | duration
//
// The sweep points are the cartesian product of the clauses, the first clause
// varying slowest. "Run.speed=1.5,2,2.5,3" gives four points.
struct SweepClause {
  enum class Selector { All, Index, Mode };
  Selector selector = Selector::All;
  int segment_index = 0;
  std::string mode_key;  // normalized
  std::string field;
  std::vector<double> values;
};

struct SweepSpec {
  std::vector<SweepClause> clauses;

  // Throws std::invalid_argument with the offending clause.
  static SweepSpec parse(std::string_view text);
  std::size_t point_count() const;
  // Assignment of each clause for point `p`, as (clause index, value).
  std::vector<std::pair<std::size_t, double>> point(std::size_t p) const;
  Recipe apply(const Registry& registry, const Recipe& recipe, std::size_t p) const;
};

struct TransitionStats {
  int segment = 0;  // index of the segment the switch enters
  std::string from_mode;
  std::string to_mode;
  std::int64_t switch_ms = 0;
  std::optional<QualityReport> quality;  // absent when the window is too short
};

struct RunReport {
  std::string recipe;
  std::size_t recipe_index = 0;
  std::size_t point_index = 0;
  std::vector<std::pair<std::size_t, double>> sweep_values;
  std::string session_id;
  bool passed = true;
  bool written = false;
  std::vector<TransitionStats> transitions;
};

struct BatchReport {
  std::size_t generated = 0;
  std::size_t filtered = 0;
  std::vector<RunReport> runs;
};

nlohmann::ordered_json report_to_json(const BatchReport& report);

struct BatchOptions {
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  std::optional<SweepSpec> sweep;
  bool filter = true;
  QualityThresholds thresholds;
  PlannerLimits limits;
  unsigned jobs = 1;
  std::string created_at = "1970-01-01T00:00:00Z";
};

// Annotation seed of a batch run; shared by every sweep point of a recipe.
std::uint64_t run_seed(std::uint64_t batch_seed, const Recipe& recipe);

// Executes every recipe x sweep point under the virtual clock, applies the
// transition filter and writes packages for passing runs plus report.json.
// Throws InvalidRecipe, IoError.
BatchReport run_batch(const Registry& registry, const Banks& banks, const std::vector<Recipe>& recipes,
                      const BatchOptions& options);

}  // namespace mocomp
