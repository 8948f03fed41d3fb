// Config-driven runs and their output directory.
#pragma once

#include "omdp/config.hpp"

#include <ostream>

namespace omdp {

struct SeedResult {
    std::uint64_t seed = 0;
    EpisodeLog log;
    RegretReport report;
};

/// Runs every seed of the config (concurrently) and computes its regret report.
std::vector<SeedResult> run_seeds(const RunConfig& config, const PreparedRun& run);

/// Columns t,seeds,mean_regret,std_regret,regret_over_sqrt_tlnt at log_spaced_rounds(T, points), keeping the
/// rounds benchmarked in every log. std_regret needs two seeds and the ratio is empty at t = 1.
std::string aggregate_csv(const std::vector<SeedResult>& results, int points = 40);

/// Writes config.json, seed_<s>.csv, seed_<s>_summary.json and aggregate.csv under config.output.
/// Returns 0, or 1 when a seed aborted.
int run_command(const RunConfig& config, std::ostream& out);

/// Per-algorithm, per-check pass/fail/skipped counts over the seed_*_summary.json files of dir.
/// Throws IoError when dir holds no summaries.
std::string bounds_table(const std::string& dir);

}  // namespace omdp
