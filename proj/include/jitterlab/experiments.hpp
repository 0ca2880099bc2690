#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "jitterlab/config.hpp"
#include "jitterlab/io.hpp"

namespace jitterlab {

/// Tables produced by one command. The first entry has an empty suffix and
/// goes to the requested output path; others go to <stem><suffix>.csv.
using ExperimentOutputs = std::vector<std::pair<std::string, CsvTable>>;

ExperimentOutputs run_alpha_curve(const Config& config);
ExperimentOutputs run_equivalence(const Config& config);
ExperimentOutputs run_gap(const Config& config);
ExperimentOutputs run_large_eps(const Config& config);
ExperimentOutputs run_sweep(const Config& config);

std::vector<std::string> experiment_names();
/// Dispatches on the subcommand name; unknown names raise a config error.
ExperimentOutputs run_experiment(std::string_view name, const Config& config);

}  // namespace jitterlab
