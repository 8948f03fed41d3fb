#include "omdp/rftl.hpp"

#include "omdp/log.hpp"

#include <cmath>
#include <limits>

namespace omdp {

Theorem1Parameters theorem1_parameters(int horizon, double tau, double num_pairs) {
    if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
    if (!(tau > 0.0) || std::isinf(tau))
        throw std::invalid_argument("theorem1 schedule needs a finite positive tau; supply eta and delta manually");
    if (!(num_pairs > 1.0)) throw std::invalid_argument("need more than one state-action pair");
    Theorem1Parameters p;
    p.eta = std::sqrt(horizon * std::log(num_pairs) / tau);
    p.delta = std::exp(-std::sqrt(static_cast<double>(horizon)) / std::sqrt(tau));
    return p;
}

Theorem1Parameters theorem1_parameters(int horizon, double tau, int num_states, int num_actions) {
    return theorem1_parameters(horizon, tau, static_cast<double>(num_states) * num_actions);
}

RftlState rftl_init(std::shared_ptr<const ShrunkPolytope> polytope, const RftlConfig& config, std::uint64_t seed) {
    if (!(config.eta > 0.0)) throw std::invalid_argument("eta must be positive");
    if (config.horizon < 1) throw std::invalid_argument("horizon must be at least 1");
    if (!(polytope->delta() > 0.0)) throw std::invalid_argument("delta must be positive");
    RftlState state;
    state.config = config;
    state.config.delta = polytope->delta();
    const int n = polytope->num_pairs();
    state.cum_reward = RewardTable::Zero(n);
    auto first = solve_rftl_step(*polytope, state.cum_reward, 1, config.eta, config.solver);
    state.mu = std::move(first.mu);
    state.last_newton_steps = first.newton_steps;
    state.last_gap_bound = first.gap_bound;
    state.rng.seed(seed);
    state.polytope = std::move(polytope);
    if (state.config.horizon < std::pow(std::log(1.0 / state.polytope->delta_max()), 2))
        log::warn("horizon ", state.config.horizon, " is below ln^2(1/delta_max) = ",
                  std::pow(std::log(1.0 / state.polytope->delta_max()), 2));
    return state;
}

RftlState rftl_init(const MdpModel& model, const RftlConfig& config, std::uint64_t seed) {
    auto poly = std::make_shared<const ShrunkPolytope>(ShrunkPolytope::with_clamp(model, config.delta, config.solver));
    return rftl_init(std::move(poly), config, seed);
}

int rftl_act(const RftlState& state, int s, Rng& rng) {
    const int A = state.polytope->flow().num_actions();
    if (s < 0 || s >= state.polytope->flow().num_states()) throw std::out_of_range("state out of range");
    return sample_index(state.mu.data() + static_cast<std::ptrdiff_t>(s) * A, A, rng, 1e-15);
}

int rftl_act(RftlState& state, int s) { return rftl_act(state, s, state.rng); }

void rftl_update(RftlState& state, const RewardTable& r) {
    if (r.size() != state.cum_reward.size()) throw std::invalid_argument("reward table has wrong size");
    check_reward_bounds(r);
    state.cum_reward += r;
    auto next = solve_rftl_step(*state.polytope, state.cum_reward, state.t, state.config.eta, state.config.solver,
                                &state.mu);
    state.mu = std::move(next.mu);
    state.last_newton_steps = next.newton_steps;
    state.last_gap_bound = next.gap_bound;
    ++state.t;
}

StationaryPolicy rftl_policy(const MdpModel& model, const RftlState& state) {
    return policy_from_occupancy(model, state.mu, 1e-15);
}

}  // namespace omdp
