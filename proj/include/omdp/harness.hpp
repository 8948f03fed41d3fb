// Online protocol, episode logs, benchmarks, regret accounting and bound checks.
#pragma once

#include "omdp/adversary.hpp"
#include "omdp/large_rftl.hpp"
#include "omdp/rftl.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace omdp {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Independent 64-bit seed for stream k of a run.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct RoundDiagnostics {
    double flow_l1 = 0.0;
    double shortfall_l1 = 0.0;
    double entropy = 0.0;
};

class Learner {
public:
    virtual ~Learner() = default;

    virtual std::string name() const = 0;
    virtual double eta() const = 0;
    virtual double delta() const = 0;

    virtual int act(int s) = 0;
    virtual void update(const RewardTable& r) = 0;

    /// mu_t for the exact learner, Phi theta_t for the feature learner.
    virtual Vector snapshot() const = 0;
    /// theta_t, empty for the exact learner.
    virtual Vector weights() const { return {}; }
    virtual StationaryPolicy policy() const = 0;
    virtual RoundDiagnostics diagnostics() const = 0;
    virtual long long inner_iterations() const = 0;
};

class ExactLearner : public Learner {
public:
    ExactLearner(const MdpModel& model, std::shared_ptr<const ShrunkPolytope> polytope, const RftlConfig& config,
                 std::uint64_t seed);

    std::string name() const override { return "exact"; }
    double eta() const override { return state_.config.eta; }
    double delta() const override { return state_.polytope->delta(); }
    int act(int s) override { return rftl_act(state_, s); }
    void update(const RewardTable& r) override { rftl_update(state_, r); }
    Vector snapshot() const override { return state_.mu; }
    StationaryPolicy policy() const override;
    RoundDiagnostics diagnostics() const override;
    long long inner_iterations() const override { return state_.last_newton_steps; }

    const RftlState& state() const { return state_; }

private:
    const MdpModel* model_;
    RftlState state_;
};

class LargeLearner : public Learner {
public:
    LargeLearner(std::shared_ptr<const FeatureModel> features, std::shared_ptr<const Sampler> sampler,
                 const LargeRftlConfig& config, std::uint64_t seed);

    std::string name() const override { return "large"; }
    double eta() const override { return state_.config.eta; }
    double delta() const override { return state_.config.delta; }
    int act(int s) override { return large_rftl_act(state_, s); }
    void update(const RewardTable& r) override { large_rftl_update_table(state_, r); }
    Vector snapshot() const override { return state_.features->phi().apply(state_.theta); }
    Vector weights() const override { return state_.theta; }
    StationaryPolicy policy() const override { return feature_policy(*state_.features, state_.theta); }
    RoundDiagnostics diagnostics() const override;
    long long inner_iterations() const override { return state_.last_iterations; }

    const LargeRftlState& state() const { return state_; }

private:
    LargeRftlState state_;
};

using LearnerFactory = std::function<std::unique_ptr<Learner>(std::uint64_t seed)>;

struct RoundRecord {
    int t = 0;
    int s = 0;
    int a = 0;
    double reward = 0.0;             // r_t(s_t, a_t)
    double cum_reward = 0.0;
    double expected_reward = kNaN;   // E[r_t(s_t, a_t)] given the learner's internal randomness
    double expected_cum = kNaN;
    double benchmark_cum = kNaN;     // max over Delta_M of <mu, r_1 + ... + r_t>
    double flow_l1 = 0.0;
    double shortfall_l1 = 0.0;
    double entropy = 0.0;
    long long inner_iters = 0;
};

struct EpisodeLog {
    std::string learner;
    int num_states = 0;
    int num_actions = 0;
    int horizon = 0;
    std::uint64_t seed = 0;
    bool oblivious = true;
    double eta = 0.0;
    double delta = 0.0;
    std::vector<RoundRecord> rounds;
    std::vector<RewardTable> rewards;  // r_1..r_T when kept
    std::vector<Vector> snapshots;     // learner occupancy at t = 1..T+1 when kept
    std::vector<Vector> weights;       // theta_1..theta_{T+1} for the feature learner
    RewardTable cum_reward;
    long long grad_samples = 0;  // feature learner gradient monitor
    long long grad_violations = 0;
    double grad_max_ratio = 0.0;
    bool aborted = false;
    std::string error;

    bool has_rewards() const { return !rounds.empty() && static_cast<int>(rewards.size()) == horizon; }
    bool has_snapshots() const { return !rounds.empty() && static_cast<int>(snapshots.size()) == horizon + 1; }
    bool has_expected() const;
};

struct HarnessOptions {
    bool keep_rewards = true;
    bool keep_snapshots = true;
    bool track_expected = true;   // propagate the state distribution (oblivious streams only)
    bool diagnostics = true;
    int benchmark_every = 1;      // 0: only at the log-spaced checkpoints and T
    int checkpoints = 40;         // log-spaced benchmark rounds; 0 disables them
};

/// Sorted distinct rounds in [1, T], roughly log-spaced, always including T.
std::vector<int> log_spaced_rounds(int horizon, int count);

/// Runs the protocol: observe s_t, snapshot, act, reveal r_t, update, transition.
/// Learner, adversary and environment use derive_seed(seed, 1 / 2 / 3). A learner
/// or solver exception stops the run and is recorded in the log.
EpisodeLog run_experiment(const MdpModel& model, const LearnerFactory& learner, const StreamSpec& stream,
                          int horizon, std::uint64_t seed, const HarnessOptions& options = {});

/// Same loop with a caller-owned learner and stream.
EpisodeLog run_experiment(const MdpModel& model, Learner& learner, RewardStream& stream, int horizon,
                          std::uint64_t seed, const HarnessOptions& options = {});

enum class BenchmarkMode { Lp, Enumerate, Simulate };

struct BenchmarkResult {
    double value = 0.0;
    double sigma = 0.0;    // standard error of the simulated value
    double lp_value = 0.0;
    StationaryPolicy policy = StationaryPolicy::uniform(1, 1);
    Vector mu;
};

/// Best fixed stationary policy against the reward history. Enumerate refuses |A|^|S| > 4096.
BenchmarkResult best_static_benchmark(const MdpModel& model, const std::vector<RewardTable>& rewards,
                                      BenchmarkMode mode, int rollouts = 200, std::uint64_t seed = 0);

/// Mean and standard error of sum_t r_t(s_t, a_t) under a fixed policy.
std::pair<double, double> simulate_policy_value(const MdpModel& model, const StationaryPolicy& policy,
                                                const std::vector<RewardTable>& rewards, int rollouts,
                                                std::uint64_t seed);

struct Decomposition {
    bool available = false;
    double t1 = 0.0;
    double t1_sigma = 0.0;
    double t2 = 0.0;
    double t3 = 0.0;           // realized
    double t3_expected = kNaN;  // with E[r_t(s_t, a_t)] in place of the realized reward
    double measured = 0.0;     // simulated comparator value minus realized learner reward
    double comparator_simulated = 0.0;
    double comparator_stationary = 0.0;  // sum_t <mu^pi, r_t>
};

Decomposition regret_decomposition(const EpisodeLog& log, const MdpModel& model, const StationaryPolicy& comparator,
                                   int rollouts = 200, std::uint64_t seed = 0);

enum class CheckStatus { Pass, Fail, Skipped };
std::string check_status_name(CheckStatus status);

struct BoundCheck {
    std::string name;
    std::string lemma;
    CheckStatus status = CheckStatus::Skipped;
    double lhs = kNaN;
    double rhs = kNaN;
    double slack = kNaN;  // rhs - lhs at the tightest point
    long long evaluated = 0;
    long long violations = 0;
    std::string detail;
};

struct BoundsContext {
    double tau = kNaN;   // mixing time; computed from the model when NaN
    int rollouts = 200;
    std::uint64_t seed = 0;
    const FeatureModel* features = nullptr;  // required for the feature-path checks
    int feature_rounds = 20;                 // rounds sampled for the LP-based feature checks
    int diameter_pairs = 1000;
    double tol = 1e-7;
    const Decomposition* decomposition = nullptr;  // reused when already computed
};

struct RegretReport {
    double benchmark = kNaN;          // LP value of the cumulative reward
    double benchmark_simulated = kNaN;
    double benchmark_sigma = kNaN;
    double learner_cum = 0.0;
    double learner_expected = kNaN;
    double regret = kNaN;             // benchmark minus expected reward when available, else realized
    bool regret_expected = false;
    Decomposition decomposition;
    std::vector<BoundCheck> checks;
};

std::vector<BoundCheck> verify_theory_bounds(const EpisodeLog& log, const MdpModel& model,
                                             const BoundsContext& context = {});

RegretReport regret_report(const EpisodeLog& log, const MdpModel& model, const BoundsContext& context = {},
                           bool verify = true);

}  // namespace omdp
