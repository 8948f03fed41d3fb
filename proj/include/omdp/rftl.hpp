// Exact occupancy-measure RFTL learner.
#pragma once

#include "omdp/polytope.hpp"

#include <cstdint>
#include <memory>

namespace omdp {

struct RftlConfig {
    int horizon = 1;
    double eta = 1.0;
    double delta = 1e-3;
    SolverOptions solver;
};

struct Theorem1Parameters {
    double eta = 0.0;
    double delta = 0.0;
};

/// eta = sqrt(T ln(num_pairs) / tau), delta = exp(-sqrt(T / tau)), before clamping.
Theorem1Parameters theorem1_parameters(int horizon, double tau, double num_pairs);
Theorem1Parameters theorem1_parameters(int horizon, double tau, int num_states, int num_actions);

struct RftlState {
    std::shared_ptr<const ShrunkPolytope> polytope;
    RftlConfig config;
    int t = 1;
    Vector mu;
    RewardTable cum_reward;
    Rng rng;
    int last_newton_steps = 0;
    double last_gap_bound = 0.0;
};

/// mu_1 is the maximum-entropy point of the polytope.
RftlState rftl_init(std::shared_ptr<const ShrunkPolytope> polytope, const RftlConfig& config, std::uint64_t seed);

/// Builds the polytope with the delta clamp applied to config.delta.
RftlState rftl_init(const MdpModel& model, const RftlConfig& config, std::uint64_t seed);

/// Samples from mu_t(s, .) normalized; uniform if the row mass is <= 1e-15.
int rftl_act(const RftlState& state, int s, Rng& rng);
int rftl_act(RftlState& state, int s);

/// Adds r_t to the running sum and solves for mu_{t+1} warm-started at mu_t.
void rftl_update(RftlState& state, const RewardTable& r);

StationaryPolicy rftl_policy(const MdpModel& model, const RftlState& state);

}  // namespace omdp
