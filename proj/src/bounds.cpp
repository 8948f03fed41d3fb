#include "omdp/harness.hpp"

#include "omdp/log.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace omdp {

std::string check_status_name(CheckStatus status) {
    switch (status) {
        case CheckStatus::Pass: return "pass";
        case CheckStatus::Fail: return "fail";
        case CheckStatus::Skipped: return "skipped";
    }
    return "unknown";
}

namespace {

// Tracks the tightest (rhs - lhs) over many evaluations of lhs <= rhs.
struct Tally {
    BoundCheck check;
    double tol = 0.0;

    Tally(std::string name, std::string lemma, double tolerance) : tol(tolerance) {
        check.name = std::move(name);
        check.lemma = std::move(lemma);
    }

    void add(double lhs, double rhs) {
        ++check.evaluated;
        double slack = rhs - lhs;
        if (!(lhs <= rhs + tol)) ++check.violations;
        if (std::isnan(check.slack) || slack < check.slack || std::isnan(slack)) {
            check.slack = slack;
            check.lhs = lhs;
            check.rhs = rhs;
        }
    }

    BoundCheck finish(std::string detail = {}) {
        if (check.evaluated == 0)
            check.status = CheckStatus::Skipped;
        else
            check.status = check.violations == 0 ? CheckStatus::Pass : CheckStatus::Fail;
        if (!detail.empty()) check.detail = std::move(detail);
        return check;
    }

    BoundCheck skip(std::string why) {
        check.status = CheckStatus::Skipped;
        check.detail = std::move(why);
        return check;
    }
};

const char* kClosenessLemma = "||mu_t - mu_{t+1}||_1 <= (2 eta / t)(1 + G_R / eta)";
const char* kLeaderLemma = "max_{Delta_{M,delta}} <sum r_t, mu> <= sum <r_t, mu_{t+1}> + (T / eta) ln(|S||A|)";
const char* kShrunkLemma = "max_{Delta_M} - max_{Delta_{M,delta}} <= 2 delta T (|S||A| - 1)";
const char* kEntropyLemma = "||grad R(mu_t)||_inf <= G_R = max(|ln delta|, 1)";
const char* kFirstLemma = "E[sum r_t(s^pi_t, a^pi_t)] - sum <mu^pi, r_t> <= 2 tau + 2 (+3 sigma_MC)";
const char* kThirdLemma =
    "sum <mu^{pi_t}, r_t> - E[sum r_t(s_t, a_t)] <= 2(1 + tau) + 2 eta (1 + G_R / eta)(1 + ln T)(1 + tau)";
const char* kNearLemma = "||mu^u - u||_1 <= tau ln(1/eps')(2 eps' + eps'') + 3 eps'";
const char* kProjectionLemma = "||P(Phi theta) - Phi theta||_1 <= c (eps' + eps'') (+ measured dual gap)";
const char* kDiameterLemma = "F_t(Phi theta_1) - F_t(Phi theta_2) <= t [2 + (1 / eta)(1 + ln(|S||A|))]";
const char* kGradientLemma = "||grad F_t(Phi theta)||_inf <= t (1 + 2 sqrt(tau) d W)";
const char* kNormLemma = "||g||_2 <= t sqrt(d) + H_t (C1 + C2) + (t / eta)(1 + ln(W d) + |ln delta|) C1";

const std::vector<std::pair<const char*, const char*>>& all_checks() {
    static const std::vector<std::pair<const char*, const char*>> names = {
        {"iterate_closeness", kClosenessLemma}, {"be_the_leader", kLeaderLemma},
        {"shrunk_loss", kShrunkLemma},          {"entropy_lipschitz", kEntropyLemma},
        {"first_term", kFirstLemma},            {"third_term", kThirdLemma},
        {"near_feasible", kNearLemma},          {"projection_sensitivity", kProjectionLemma},
        {"diameter", kDiameterLemma},           {"ft_gradient", kGradientLemma},
        {"gradient_norm", kNormLemma}};
    return names;
}

// Up to count rounds in [first, last], evenly spaced, always including last.
std::vector<int> sample_rounds(int first, int last, int count) {
    std::vector<int> out;
    if (last < first || count < 1) return out;
    const int span = last - first + 1;
    if (span <= count) {
        for (int t = first; t <= last; ++t) out.push_back(t);
        return out;
    }
    for (int k = 0; k < count; ++k) out.push_back(first + static_cast<int>((static_cast<long long>(span - 1) * (k + 1)) / count));
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

double grad_entropy_inf(const Vector& mu) {
    double g = 0.0;
    for (int i = 0; i < mu.size(); ++i) g = std::max(g, std::abs(1.0 + std::log(mu[i])));
    return g;
}

struct Ctx {
    const EpisodeLog& log;
    const MdpModel& model;
    const BoundsContext& opts;
    double tau;
    int n;
    double T;
    double g_r;
};

BoundCheck check_closeness(const Ctx& c) {
    Tally tally("iterate_closeness", kClosenessLemma, c.opts.tol);
    if (!c.log.has_snapshots()) return tally.skip("no occupancy snapshots");
    const double eta = c.log.eta;
    for (int t = 1; t <= c.log.horizon; ++t) {
        double lhs = (c.log.snapshots[t - 1] - c.log.snapshots[t]).lpNorm<1>();
        tally.add(lhs, (2 * eta / t) * (1 + c.g_r / eta));
    }
    return tally.finish();
}

BoundCheck check_leader(const Ctx& c, const ShrunkPolytope& shrunk) {
    Tally tally("be_the_leader", kLeaderLemma, c.opts.tol * std::max(1.0, c.T));
    if (!c.log.has_snapshots() || !c.log.has_rewards()) return tally.skip("needs snapshots and reward tables");
    double follow = 0.0;
    for (int t = 1; t <= c.log.horizon; ++t) follow += c.log.rewards[t - 1].dot(c.log.snapshots[t]);
    double best = maximize_linear(shrunk, c.log.cum_reward).value;
    tally.add(best, follow + (c.T / c.log.eta) * std::log(static_cast<double>(c.n)));
    return tally.finish();
}

BoundCheck check_shrunk(const Ctx& c, const ShrunkPolytope& shrunk) {
    const double scale = std::max(1.0, c.log.cum_reward.lpNorm<Eigen::Infinity>());
    Tally tally("shrunk_loss", kShrunkLemma, c.opts.tol * scale);
    ShrunkPolytope full(c.model, 0.0);
    double lhs = maximize_linear(full, c.log.cum_reward).value - maximize_linear(shrunk, c.log.cum_reward).value;
    tally.add(lhs, 2 * shrunk.delta() * c.T * (c.n - 1));
    return tally.finish();
}

BoundCheck check_entropy(const Ctx& c) {
    Tally tally("entropy_lipschitz", kEntropyLemma, c.opts.tol);
    if (!c.log.has_snapshots()) return tally.skip("no occupancy snapshots");
    for (const auto& mu : c.log.snapshots) tally.add(grad_entropy_inf(mu), c.g_r * (1 + 1e-9));
    return tally.finish();
}

BoundCheck check_first(const Ctx& c, const Decomposition& d) {
    Tally tally("first_term", kFirstLemma, 0.0);
    if (!std::isfinite(c.tau)) return tally.skip("mixing time is infinite");
    if (!d.available) return tally.skip("decomposition unavailable");
    tally.add(d.t1, 2 * c.tau + 2 + 3 * d.t1_sigma);
    return tally.finish("sigma_MC " + std::to_string(d.t1_sigma));
}

BoundCheck check_third(const Ctx& c, const Decomposition& d) {
    Tally tally("third_term", kThirdLemma, c.opts.tol * std::max(1.0, c.T));
    if (!std::isfinite(c.tau)) return tally.skip("mixing time is infinite");
    if (!d.available) return tally.skip("decomposition unavailable");
    if (std::isnan(d.t3_expected)) return tally.skip("expected learner reward unavailable (adaptive stream)");
    const double eta = c.log.eta;
    tally.add(d.t3_expected, 2 * (1 + c.tau) + 2 * eta * (1 + c.g_r / eta) * (1 + std::log(c.T)) * (1 + c.tau));
    return tally.finish("expected-reward form");
}

BoundCheck check_near(const Ctx& c) {
    Tally tally("near_feasible", kNearLemma, 1e-9);
    if (!std::isfinite(c.tau)) return tally.skip("mixing time is infinite");
    if (!c.log.has_snapshots()) return tally.skip("no snapshots");
    long long vacuous = 0, singular = 0;
    for (int t : sample_rounds(1, c.log.horizon + 1, c.opts.feature_rounds)) {
        try {
            auto rep = near_feasible_to_occupancy(c.model, c.log.snapshots[t - 1], c.tau);
            if (rep.vacuous) ++vacuous;
            tally.add(rep.distance, rep.bound);
        } catch (const NonUniqueStationary&) {
            ++singular;
        }
    }
    return tally.finish(std::to_string(vacuous) + " vacuous, " + std::to_string(singular) + " without a unique occupancy");
}

BoundCheck check_projection(const Ctx& c) {
    Tally tally("projection_sensitivity", kProjectionLemma, 1e-8);
    if (!c.opts.features) return tally.skip("no feature model");
    if (static_cast<int>(c.log.weights.size()) != c.log.horizon + 1) return tally.skip("no weight snapshots");
    const auto& fm = *c.opts.features;
    long long uncertified = 0, failed = 0;
    for (int t : sample_rounds(1, c.log.horizon + 1, c.opts.feature_rounds)) {
        const Vector& theta = c.log.weights[t - 1];
        try {
            auto rep = project_onto_feature_occupancy(fm, theta, c.log.delta);
            if (!rep.certified) {
                ++uncertified;
                continue;
            }
            Vector u = fm.phi().apply(theta);
            double eps = shortfall_penalty(u, c.log.delta) + fm.flow_residual(theta);
            tally.add(rep.distance, rep.multiplier_bound * eps + rep.dual_gap);
        } catch (const std::exception& e) {
            ++failed;
            log::debug("projection check at round ", t, ": ", e.what());
        }
    }
    return tally.finish(std::to_string(uncertified) + " uncertified, " + std::to_string(failed) + " unsolved");
}

// Random points of Theta^Phi plus the learner's weights.
std::vector<Vector> theta_points(const Ctx& c) {
    const auto& phi = c.opts.features->phi();
    const int d = phi.dim();
    std::vector<Vector> pts(c.log.weights.begin(), c.log.weights.end());
    Rng rng(derive_seed(c.opts.seed, 7));
    std::exponential_distribution<double> e(1.0);
    for (int k = 0; k < 2 * c.opts.diameter_pairs; ++k) {
        Vector raw(d);
        for (int j = 0; j < d; ++j) raw[j] = e(rng);
        raw *= phi.weight_cap() / raw.sum();
        try {
            pts.push_back(project_theta(raw, phi.column_mass(), phi.weight_cap()));
        } catch (const std::exception&) {
            break;
        }
    }
    return pts;
}

void check_feature_objective(const Ctx& c, std::vector<BoundCheck>& out) {
    Tally diam("diameter", kDiameterLemma, c.opts.tol * std::max(1.0, c.T));
    Tally grad("ft_gradient", kGradientLemma, c.opts.tol * std::max(1.0, c.T));
    if (!c.opts.features || !c.log.has_rewards() || static_cast<int>(c.log.weights.size()) != c.log.horizon + 1) {
        out.push_back(diam.skip("needs the feature model, reward tables and weights"));
        out.push_back(grad.skip("needs the feature model, reward tables and weights"));
        return;
    }
    const auto& phi = c.opts.features->phi();
    const double eta = c.log.eta, delta = c.log.delta, W = phi.weight_cap(), d = phi.dim();
    const auto pts = theta_points(c);
    std::vector<Vector> mus;
    mus.reserve(pts.size());
    for (const auto& p : pts) mus.push_back(phi.apply(p));

    // The printed constant assumes eta = sqrt(T / tau) and delta = exp(-sqrt(T)).
    const bool theorem_params = std::isfinite(c.tau) && c.tau > 0 &&
                                std::abs(eta - std::sqrt(c.T / c.tau)) <= 1e-9 * eta &&
                                std::abs(delta - std::exp(-std::sqrt(c.T))) <= 1e-9 * delta;
    const double entropy_sup = std::max(std::abs(1 + std::log(delta)), std::abs(1 + std::log(d * W)));

    auto rounds = sample_rounds(1, c.log.horizon, c.opts.feature_rounds);
    RewardTable cum = RewardTable::Zero(c.n);
    int done = 0;
    for (int t : rounds) {
        for (; done < t; ++done) cum += c.log.rewards[done];
        const double w = t / eta;
        double hi = -std::numeric_limits<double>::infinity(), lo = std::numeric_limits<double>::infinity();
        double gmax = 0.0;
        for (const auto& mu : mus) {
            double f = cum.dot(mu) - w * smoothed_entropy(mu, delta);
            hi = std::max(hi, f);
            lo = std::min(lo, f);
            for (int i = 0; i < c.n; ++i)
                gmax = std::max(gmax, std::abs(cum[i] - w * smoothed_entropy_derivative(mu[i], delta)));
        }
        diam.add(hi - lo, t * (2 + (1 + std::log(static_cast<double>(c.n))) / eta));
        grad.add(gmax, theorem_params ? t * (1 + 2 * std::sqrt(c.tau) * d * W) : t + w * entropy_sup);
    }
    out.push_back(diam.finish(std::to_string(pts.size()) + " points"));
    out.push_back(grad.finish(theorem_params ? "theorem parameters" : "general form t + (t / eta) max|1 + ln x|"));
}

}  // namespace

std::vector<BoundCheck> verify_theory_bounds(const EpisodeLog& log, const MdpModel& model,
                                             const BoundsContext& context) {
    std::vector<BoundCheck> out;
    auto skip_all = [&](const std::string& why) {
        for (const auto& [name, lemma] : all_checks()) {
            BoundCheck b;
            b.name = name;
            b.lemma = lemma;
            b.detail = why;
            out.push_back(b);
        }
        return out;
    };
    if (log.rounds.empty()) return skip_all("empty log");
    if (log.num_states != model.num_states() || log.num_actions != model.num_actions())
        throw std::invalid_argument("log does not match the model");
    const bool complete = !log.aborted && static_cast<int>(log.rounds.size()) == log.horizon;
    if (!complete) return skip_all("incomplete log");

    double tau = context.tau;
    if (std::isnan(tau)) tau = mixing_coefficient(model).tau;
    const Ctx c{log, model, context, tau, model.num_pairs(), static_cast<double>(log.horizon),
                std::max(std::abs(std::log(log.delta)), 1.0)};
    const bool exact = log.learner == "exact";
    const bool large = log.learner == "large";

    Decomposition dec;
    if (context.decomposition) {
        dec = *context.decomposition;
    } else if (log.has_rewards() && log.has_snapshots()) {
        auto lp = best_static_benchmark(model, log.rewards, BenchmarkMode::Lp);
        dec = regret_decomposition(log, model, lp.policy, context.rollouts, derive_seed(context.seed, 5));
    }

    std::unique_ptr<ShrunkPolytope> shrunk;
    try {
        shrunk = std::make_unique<ShrunkPolytope>(model, log.delta);
    } catch (const InfeasiblePolytope&) {
    }

    for (const auto& [name, lemma] : all_checks()) {
        std::string n = name;
        auto na = [&](const std::string& why) {
            BoundCheck b;
            b.name = name;
            b.lemma = lemma;
            b.detail = why;
            out.push_back(b);
        };
        if (n == "iterate_closeness") {
            exact ? out.push_back(check_closeness(c)) : na("exact learner only");
        } else if (n == "be_the_leader") {
            if (!exact) na("exact learner only");
            else if (!shrunk) na("delta outside the feasible range");
            else out.push_back(check_leader(c, *shrunk));
        } else if (n == "shrunk_loss") {
            if (!shrunk) na("delta outside the feasible range");
            else out.push_back(check_shrunk(c, *shrunk));
        } else if (n == "entropy_lipschitz") {
            exact ? out.push_back(check_entropy(c)) : na("exact learner only");
        } else if (n == "first_term") {
            out.push_back(check_first(c, dec));
        } else if (n == "third_term") {
            exact ? out.push_back(check_third(c, dec)) : na("exact learner only");
        } else if (n == "near_feasible") {
            large ? out.push_back(check_near(c)) : na("feature learner only");
        } else if (n == "projection_sensitivity") {
            large ? out.push_back(check_projection(c)) : na("feature learner only");
        } else if (n == "diameter") {
            if (large) check_feature_objective(c, out);
            else na("feature learner only");
        } else if (n == "ft_gradient") {
            if (!large) na("feature learner only");
        } else if (n == "gradient_norm") {
            Tally tally(name, lemma, 0.0);
            if (!large || log.grad_samples == 0) {
                out.push_back(tally.skip("no sampled gradients recorded"));
            } else {
                tally.check.evaluated = log.grad_samples;
                tally.check.violations = log.grad_violations;
                tally.check.lhs = log.grad_max_ratio;
                tally.check.rhs = 1.0;
                tally.check.slack = 1.0 - log.grad_max_ratio;
                out.push_back(tally.finish("lhs is the largest ||g||_2 / bound"));
            }
        }
    }
    return out;
}

RegretReport regret_report(const EpisodeLog& log, const MdpModel& model, const BoundsContext& context, bool verify) {
    RegretReport rep;
    if (!log.rounds.empty()) {
        ShrunkPolytope full(model, 0.0);
        auto lp = maximize_linear(full, log.cum_reward);
        rep.benchmark = lp.value;
        rep.learner_cum = log.rounds.back().cum_reward;
        if (log.has_expected()) rep.learner_expected = log.rounds.back().expected_cum;
        rep.regret_expected = log.has_expected();
        rep.regret = rep.benchmark - (rep.regret_expected ? rep.learner_expected : rep.learner_cum);
        if (log.has_rewards()) {
            auto pi = policy_from_occupancy(model, lp.mu, 1e-15);
            rep.decomposition = regret_decomposition(log, model, pi, context.rollouts, derive_seed(context.seed, 5));
            if (rep.decomposition.available) {
                rep.benchmark_simulated = rep.decomposition.comparator_simulated;
                rep.benchmark_sigma = rep.decomposition.t1_sigma;
            }
        }
    } else {
        rep.benchmark = 0.0;
        rep.regret = 0.0;
    }
    if (verify) {
        BoundsContext ctx = context;
        if (rep.decomposition.available) ctx.decomposition = &rep.decomposition;
        rep.checks = verify_theory_bounds(log, model, ctx);
    }
    return rep;
}

}  // namespace omdp
