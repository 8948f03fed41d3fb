// Feature-scale learner: PSGA on the penalized objective each round.
#pragma once

#include "omdp/features.hpp"
#include "omdp/polytope.hpp"

#include <cstdint>
#include <memory>
#include <string>

namespace omdp {

enum class Theorem2Preset { Statement, Proof };

struct LargeRftlConfig {
    int horizon = 1;
    double eta = 1.0;
    double delta = 1e-3;
    // H_t = penalty_coef * t^penalty_exp
    double penalty_coef = 1.0;
    double penalty_exp = 1.0;
    // K(t) = max(1, min(k_cap, practical_scale * k_coef * t^k_exp))
    double k_coef = 1.0;
    double k_exp = 0.0;
    double practical_scale = 1.0;
    double k_cap = 1e12;
    // w_t = step_scale * W / (sqrt(K(t)) * (t sqrt(d) + H_t (C1 + C2) + (t / eta) * entropy_factor * C1))
    double step_scale = 1.0;
    bool full_entropy_factor = false;  // entropy_factor = 1 + ln(W d) + |ln delta| instead of 1

    double penalty(int t) const;
    long long iterations(int t) const;
    double step(int t, const FeatureModel& fm, const Sampler& sampler) const;
    double init_step(const FeatureModel& fm, const Sampler& sampler) const;
};

/// eta = sqrt(T / tau), delta = exp(-sqrt(T)) and the H_t, K(t) schedules of either preset.
/// practical_scale <= 0 picks the largest scale <= 1 with K(T) <= 1e5.
LargeRftlConfig theorem2_parameters(int horizon, double tau, int dim, double weight_cap, double c1, double c2,
                                    double practical_scale = 0.0,
                                    Theorem2Preset preset = Theorem2Preset::Statement);

struct GradientMonitor {
    long long samples = 0;
    long long violations = 0;
    double max_ratio = 0.0;  // max ||g||_2 / bound
};

struct LargeRftlState {
    std::shared_ptr<const FeatureModel> features;
    std::shared_ptr<const Sampler> sampler;
    LargeRftlConfig config;
    int t = 1;
    Vector theta;
    Vector cum_feature;
    Rng rng;
    long long last_iterations = 0;
    double last_step = 0.0;
    GradientMonitor monitor;
};

/// theta_1 from PSGA on -R^delta + V with H_1, K(1) and step w_0.
LargeRftlState init_large(std::shared_ptr<const FeatureModel> features, std::shared_ptr<const Sampler> sampler,
                          const LargeRftlConfig& config, std::uint64_t seed);

/// Samples from [Phi theta]_+ on the row of s, uniform if that mass is <= 1e-15.
int large_rftl_act(const LargeRftlState& state, int s, Rng& rng);
int large_rftl_act(LargeRftlState& state, int s);

/// feature_reward = Phi' r_t.
void large_rftl_update(LargeRftlState& state, const Vector& feature_reward);
void large_rftl_update_table(LargeRftlState& state, const RewardTable& r);

struct LargeDiagnostics {
    double shortfall = 0.0;      // ||[Phi theta]_(delta,-)||_1
    double flow_residual = 0.0;  // ||(Phi theta)'(P - B)||_1
    double negative_mass = 0.0;  // ||[Phi theta]_-||_1
    double mass = 0.0;           // 1'Phi theta
};

LargeDiagnostics large_diagnostics(const LargeRftlState& state);

/// [Phi theta]_+ normalized per state, uniform on empty rows.
StationaryPolicy feature_policy(const FeatureModel& fm, const Vector& theta);

struct NearFeasibleReport {
    Vector occupancy;       // mu^u
    double distance = 0.0;  // ||mu^u - u||_1
    double negative_mass = 0.0;
    double flow_residual = 0.0;
    double eps_used = 0.0;  // the eps' >= negative_mass that minimizes the bound
    double bound = 0.0;
    bool vacuous = false;
    bool holds = false;
};

/// tau ln(1/e)(2e + eps'') + 3e, minimized over e in [eps', 1).
double near_feasible_bound(double tau, double eps1, double eps2, double* eps_used = nullptr);

NearFeasibleReport near_feasible_to_occupancy(const MdpModel& model, const Vector& u, double tau,
                                              double tol = 1e-9);

struct ProjectionReport {
    double distance = 0.0;       // min ||Phi theta - Phi theta_tilde||_1 over the feature occupancy set
    double multiplier_bound = 0.0;  // ||lambda*||_inf of the LP
    double dual_gap = 0.0;          // LP value minus b'lambda*
    bool certified = false;         // false when a presolve removed variables and lambda* may be dual infeasible
    Vector theta;
    Vector mu;
};

/// l1 projection of Phi theta_tilde onto {Phi theta : theta in Theta, Phi theta in Delta_{M,delta}}.
ProjectionReport project_onto_feature_occupancy(const FeatureModel& fm, const Vector& theta_tilde, double delta,
                                                const SolverOptions& options = {});

}  // namespace omdp
