#pragma once

#include <string>

#include "mocomp/planner.hpp"
#include "mocomp/recipe.hpp"
#include "mocomp/registry.hpp"
#include "mocomp/session.hpp"

namespace mocomp {

struct RunOptions {
  PlannerLimits limits;
  std::string session_id = "recipe";
};

// Executes a recipe against the in-process reference backend under a virtual
// clock. Commands and telemetry cross the wire codec exactly as they would
// between processes. Identical inputs give bit-identical recordings.
// Throws InvalidRecipe.
Recording execute_recipe(const Registry& registry, const Recipe& recipe, const RunOptions& options = {});

}  // namespace mocomp
