// Run configuration: strict JSON parsing, emission and experiment assembly.
#pragma once

#include "omdp/io.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace omdp {

struct ModelSpec {
    std::string path;  // empty: use the random-ergodic generator
    int states = 4;
    int actions = 2;
    std::uint64_t seed = 1;
    double min_mass = 0.05;
    double alpha = 1.0;

    bool operator==(const ModelSpec&) const = default;
};

/// Preset: theorem1 | theorem2-statement | theorem2-proof | manual. Set fields override the preset.
struct ScheduleSpec {
    std::string preset = "theorem1";
    std::optional<double> tau;
    std::optional<double> eta;
    std::optional<double> delta;
    std::optional<double> penalty_coef;
    std::optional<double> penalty_exp;
    std::optional<double> k_coef;
    std::optional<double> k_exp;
    std::optional<double> practical_scale;
    std::optional<double> k_cap;
    std::optional<double> step_scale;

    bool operator==(const ScheduleSpec&) const = default;
};

/// identity | random-sparse | file
struct FeatureSpec {
    std::string kind = "identity";
    std::string path;
    int dim = 16;
    int nnz = 3;
    double weight_cap = 1.0;
    std::uint64_t seed = 1;

    bool operator==(const FeatureSpec&) const = default;
};

struct HarnessSpec {
    int benchmark_every = 1;
    int checkpoints = 40;
    bool track_expected = true;
    std::string keep_history = "auto";  // auto | always | never
    int rollouts = 200;
    bool verify_bounds = true;
    int feature_rounds = 20;
    int diameter_pairs = 1000;

    bool operator==(const HarnessSpec&) const = default;
};

struct RunConfig {
    ModelSpec model;
    std::string algorithm = "exact";
    ScheduleSpec schedule;
    FeatureSpec features;
    StreamSpec adversary;
    int horizon = 1000;
    std::vector<std::uint64_t> seeds{1};
    std::string output = "out";
    HarnessSpec harness;

    bool operator==(const RunConfig&) const = default;
};

struct ConfigIssue {
    std::string field;  // dotted path, e.g. "schedule.eta"
    std::string message;
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<ConfigIssue> issues);
    const std::vector<ConfigIssue>& issues() const { return issues_; }

private:
    std::vector<ConfigIssue> issues_;
};

/// Strict: unknown fields, wrong types and out-of-range values are collected and thrown together.
RunConfig parse_config(const Json& j);

/// Reads and parses a file; relative model and feature paths are resolved against its directory
/// and must exist.
RunConfig load_config(const std::string& path);

/// Every field written explicitly; parse_config(emit_config(c)) == c.
Json emit_config(const RunConfig& config);

/// Range and consistency checks; throws ConfigError.
void validate_config(const RunConfig& config);

struct PreparedRun {
    std::shared_ptr<const MdpModel> model;
    MixingEstimate mixing;
    double tau = 0.0;
    std::shared_ptr<const ShrunkPolytope> polytope;
    std::shared_ptr<const FeatureModel> features;
    std::shared_ptr<const Sampler> sampler;
    RftlConfig exact;
    LargeRftlConfig large;
    LearnerFactory factory;
    HarnessOptions options;
    BoundsContext bounds;
    Json parameters;  // the resolved schedule, for summaries
};

/// Builds the model, schedule parameters and learner factory. Throws ConfigError when a preset
/// does not apply (for example theorem1 on a model with infinite mixing time).
PreparedRun prepare_run(const RunConfig& config);

}  // namespace omdp
