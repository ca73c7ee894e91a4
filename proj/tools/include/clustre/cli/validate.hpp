#pragma once

#include "clustre/cli/config.hpp"

#include <string>
#include <vector>

namespace clustre::cli {

struct Gate {
    std::string name;
    double observed = 0.0;
    double threshold = 0.0;
    bool pass = false;
    std::string note;
};

struct ValidateOptions {
    bool fast = false;
};

// The oracle suite behind `clustre validate`: moment routes, Monte Carlo
// versus closed form, gradient versus finite differences, and (when the
// three-piece hypotheses hold) analytic solver versus the QP oracle.
[[nodiscard]] std::vector<Gate> run_gates(const ScenarioConfig& config, const ValidateOptions& options);

/// Upper end of the grid used to discretise continuous mark laws.
[[nodiscard]] double discretisation_cap(const ScenarioConfig& config);

} // namespace clustre::cli
