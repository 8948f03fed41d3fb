#include "omdp/harness.hpp"

#include "omdp/log.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace omdp {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

ExactLearner::ExactLearner(const MdpModel& model, std::shared_ptr<const ShrunkPolytope> polytope,
                           const RftlConfig& config, std::uint64_t seed)
    : model_(&model), state_(rftl_init(std::move(polytope), config, seed)) {}

StationaryPolicy ExactLearner::policy() const { return policy_from_occupancy(*model_, state_.mu, 1e-15); }

RoundDiagnostics ExactLearner::diagnostics() const {
    auto res = state_.polytope->residual(state_.mu);
    return {res.flow_l1, res.shortfall_l1, -negative_entropy(state_.mu.cwiseMax(0.0))};
}

LargeLearner::LargeLearner(std::shared_ptr<const FeatureModel> features, std::shared_ptr<const Sampler> sampler,
                           const LargeRftlConfig& config, std::uint64_t seed)
    : state_(init_large(std::move(features), std::move(sampler), config, seed)) {}

RoundDiagnostics LargeLearner::diagnostics() const {
    auto d = large_diagnostics(state_);
    Vector u = snapshot();
    return {d.flow_residual, d.shortfall, -smoothed_entropy(u, state_.config.delta)};
}

bool EpisodeLog::has_expected() const { return !rounds.empty() && !std::isnan(rounds.back().expected_cum); }

std::vector<int> log_spaced_rounds(int horizon, int count) {
    std::vector<int> out;
    if (horizon < 1) return out;
    count = std::max(count, 1);
    for (int k = 0; k < count; ++k) {
        double x = count == 1 ? horizon : std::pow(static_cast<double>(horizon), static_cast<double>(k) / (count - 1));
        out.push_back(std::clamp(static_cast<int>(std::llround(x)), 1, horizon));
    }
    out.push_back(horizon);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

namespace {

std::vector<std::vector<double>> transition_rows(const MdpModel& model) {
    std::vector<std::vector<double>> rows(model.num_pairs(), std::vector<double>(model.num_states()));
    for (int i = 0; i < model.num_pairs(); ++i)
        for (int n = 0; n < model.num_states(); ++n) rows[i][n] = model.transition()(i, n);
    return rows;
}

std::vector<double> to_std(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

EpisodeLog run_experiment(const MdpModel& model, const LearnerFactory& factory, const StreamSpec& spec,
                          int horizon, std::uint64_t seed, const HarnessOptions& options) {
    auto learner = factory(derive_seed(seed, 1));
    RewardStream stream(spec, model.num_states(), model.num_actions(), derive_seed(seed, 2));
    return run_experiment(model, *learner, stream, horizon, seed, options);
}

EpisodeLog run_experiment(const MdpModel& model, Learner& learner, RewardStream& stream, int horizon,
                          std::uint64_t seed, const HarnessOptions& options) {
    if (horizon < 0) throw std::invalid_argument("horizon must be nonnegative");
    const int S = model.num_states(), A = model.num_actions(), n = model.num_pairs();
    EpisodeLog log;
    log.learner = learner.name();
    log.num_states = S;
    log.num_actions = A;
    log.horizon = horizon;
    log.seed = seed;
    log.oblivious = stream.oblivious();
    log.eta = learner.eta();
    log.delta = learner.delta();
    log.cum_reward = RewardTable::Zero(n);
    if (horizon == 0) return log;

    Rng env(derive_seed(seed, 3));
    const auto rows = transition_rows(model);
    const bool track = options.track_expected && stream.oblivious();
    const auto checkpoints =
        options.checkpoints > 0 ? log_spaced_rounds(horizon, options.checkpoints) : std::vector<int>{};
    std::unique_ptr<ShrunkPolytope> bench;

    std::vector<int> states, actions;
    states.reserve(horizon + 1);
    actions.reserve(horizon);
    auto init = to_std(model.initial_dist());
    states.push_back(sample_index(init.data(), S, env));
    Vector nu = model.initial_dist();
    double cum = 0.0, expected_cum = 0.0;
    std::size_t next_checkpoint = 0;

    try {
        if (!checkpoints.empty() || options.benchmark_every > 0) bench = std::make_unique<ShrunkPolytope>(model, 0.0);
        for (int t = 1; t <= horizon; ++t) {
            RoundRecord rec;
            rec.t = t;
            rec.s = states.back();
            if (options.keep_snapshots) {
                log.snapshots.push_back(learner.snapshot());
                auto w = learner.weights();
                if (w.size() > 0) log.weights.push_back(std::move(w));
            }
            if (options.diagnostics) {
                auto d = learner.diagnostics();
                rec.flow_l1 = d.flow_l1;
                rec.shortfall_l1 = d.shortfall_l1;
                rec.entropy = d.entropy;
            }
            Matrix pi;
            if (track) pi = learner.policy().matrix();

            rec.a = learner.act(rec.s);
            if (rec.a < 0 || rec.a >= A) throw std::logic_error("learner returned an invalid action");
            RewardTable r = stream.next(HistoryView(states, actions, S, A));
            if (r.size() != n) throw std::invalid_argument("reward table has wrong size");

            const int pair = model.pair(rec.s, rec.a);
            rec.reward = r[pair];
            cum += rec.reward;
            rec.cum_reward = cum;
            log.cum_reward += r;
            if (track) {
                double e = 0.0;
                for (int s = 0; s < S; ++s)
                    for (int a = 0; a < A; ++a) e += nu[s] * pi(s, a) * r[s * A + a];
                expected_cum += e;
                rec.expected_reward = e;
                rec.expected_cum = expected_cum;
            }

            learner.update(r);
            rec.inner_iters = learner.inner_iterations();

            bool at_checkpoint = next_checkpoint < checkpoints.size() && checkpoints[next_checkpoint] == t;
            if (at_checkpoint) ++next_checkpoint;
            if (at_checkpoint || (options.benchmark_every > 0 && t % options.benchmark_every == 0))
                rec.benchmark_cum = maximize_linear(*bench, log.cum_reward).value;

            if (options.keep_rewards) log.rewards.push_back(std::move(r));
            log.rounds.push_back(rec);

            if (track) {
                Vector next = Vector::Zero(S);
                for (int s = 0; s < S; ++s)
                    for (int a = 0; a < A; ++a) {
                        double w = nu[s] * pi(s, a);
                        if (w != 0.0) next += w * model.transition().row(s * A + a).transpose();
                    }
                nu = next;
            }
            actions.push_back(rec.a);
            states.push_back(sample_index(rows[pair].data(), S, env));
        }
        if (options.keep_snapshots) {
            log.snapshots.push_back(learner.snapshot());
            auto w = learner.weights();
            if (w.size() > 0) log.weights.push_back(std::move(w));
        }
    } catch (const std::exception& e) {
        log.aborted = true;
        log.error = e.what();
        log::warn("run aborted at round ", log.rounds.size() + 1, ": ", e.what());
    }
    if (auto* large = dynamic_cast<LargeLearner*>(&learner)) {
        log.grad_samples = large->state().monitor.samples;
        log.grad_violations = large->state().monitor.violations;
        log.grad_max_ratio = large->state().monitor.max_ratio;
    }
    return log;
}

std::pair<double, double> simulate_policy_value(const MdpModel& model, const StationaryPolicy& policy,
                                                const std::vector<RewardTable>& rewards, int rollouts,
                                                std::uint64_t seed) {
    if (rollouts < 2) throw std::invalid_argument("need at least two rollouts");
    const int S = model.num_states(), A = model.num_actions();
    const auto rows = transition_rows(model);
    std::vector<std::vector<double>> act(S, std::vector<double>(A));
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) act[s][a] = policy(s, a);
    auto init = to_std(model.initial_dist());
    Rng rng(seed);
    double mean = 0.0, m2 = 0.0;
    for (int k = 1; k <= rollouts; ++k) {
        int s = sample_index(init.data(), S, rng);
        double total = 0.0;
        for (const auto& r : rewards) {
            int a = sample_index(act[s].data(), A, rng);
            total += r[s * A + a];
            s = sample_index(rows[s * A + a].data(), S, rng);
        }
        double delta = total - mean;
        mean += delta / k;
        m2 += delta * (total - mean);
    }
    return {mean, std::sqrt(m2 / (rollouts - 1) / rollouts)};
}

BenchmarkResult best_static_benchmark(const MdpModel& model, const std::vector<RewardTable>& rewards,
                                      BenchmarkMode mode, int rollouts, std::uint64_t seed) {
    const int S = model.num_states(), A = model.num_actions();
    if (mode == BenchmarkMode::Enumerate && S * std::log(static_cast<double>(A)) > std::log(4096.0) + 1e-12)
        throw std::invalid_argument("enumeration limited to |A|^|S| <= 4096 policies");
    RewardTable cum = RewardTable::Zero(model.num_pairs());
    for (const auto& r : rewards) {
        if (r.size() != cum.size()) throw std::invalid_argument("reward table has wrong size");
        cum += r;
    }
    BenchmarkResult out;
    ShrunkPolytope poly(model, 0.0);
    auto lp = maximize_linear(poly, cum);
    out.lp_value = lp.value;

    if (mode == BenchmarkMode::Enumerate) {
        std::vector<int> choice(S, 0);
        bool found = false;
        while (true) {
            auto pi = StationaryPolicy::deterministic(choice, A);
            try {
                auto mu = occupancy_of_policy(model, pi, 1e-13);
                double v = mu.mass().dot(cum);
                if (!found || v > out.value) {
                    out.value = v;
                    out.policy = pi;
                    out.mu = mu.mass();
                    found = true;
                }
            } catch (const NonUniqueStationary&) {
                log::debug("enumerate: skipping a policy with several closed classes");
            }
            int s = 0;
            while (s < S && ++choice[s] == A) choice[s++] = 0;
            if (s == S) break;
        }
        if (!found) throw std::runtime_error("no deterministic policy has a unique stationary distribution");
        return out;
    }

    out.mu = lp.mu;
    out.value = lp.value;
    out.policy = policy_from_occupancy(model, lp.mu, 1e-15);
    if (mode == BenchmarkMode::Simulate) {
        auto [mean, se] = simulate_policy_value(model, out.policy, rewards, rollouts, seed);
        out.value = mean;
        out.sigma = se;
    }
    return out;
}

Decomposition regret_decomposition(const EpisodeLog& log, const MdpModel& model, const StationaryPolicy& comparator,
                                   int rollouts, std::uint64_t seed) {
    Decomposition d;
    if (!log.has_rewards() || !log.has_snapshots()) return d;
    Vector mu_pi;
    try {
        mu_pi = occupancy_of_policy(model, comparator, 1e-13).mass();
    } catch (const NonUniqueStationary&) {
        return d;
    }
    d.comparator_stationary = mu_pi.dot(log.cum_reward);
    auto [mean, se] = simulate_policy_value(model, comparator, log.rewards, rollouts, seed);
    d.comparator_simulated = mean;
    d.t1_sigma = se;

    double learner_stationary = 0.0;
    Vector prev_snapshot, prev_mu;
    for (int t = 0; t < log.horizon; ++t) {
        const Vector& snap = log.snapshots[t];
        if (prev_snapshot.size() == 0 || snap != prev_snapshot) {
            auto pi = policy_from_occupancy(model, snap.cwiseMax(0.0), 1e-15);
            try {
                prev_mu = occupancy_of_policy(model, pi, 1e-12).mass();
            } catch (const NonUniqueStationary&) {
                return d;
            }
            prev_snapshot = snap;
        }
        learner_stationary += prev_mu.dot(log.rewards[t]);
    }
    const double realized = log.rounds.back().cum_reward;
    d.available = true;
    d.t1 = d.comparator_simulated - d.comparator_stationary;
    d.t2 = d.comparator_stationary - learner_stationary;
    d.t3 = learner_stationary - realized;
    if (log.has_expected()) d.t3_expected = learner_stationary - log.rounds.back().expected_cum;
    d.measured = d.comparator_simulated - realized;
    return d;
}

}  // namespace omdp
