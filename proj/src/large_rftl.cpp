#include "omdp/large_rftl.hpp"

#include "omdp/barrier.hpp"
#include "omdp/log.hpp"

#include <cassert>
#include <cmath>
#include <limits>

namespace omdp {

double LargeRftlConfig::penalty(int t) const { return penalty_coef * std::pow(static_cast<double>(t), penalty_exp); }

long long LargeRftlConfig::iterations(int t) const {
    double k = practical_scale * k_coef * std::pow(static_cast<double>(t), k_exp);
    k = std::min(k, k_cap);
    if (!(k >= 1.0)) return 1;
    return static_cast<long long>(std::llround(k));
}

namespace {

double entropy_factor(const LargeRftlConfig& c, const FeatureModel& fm) {
    if (!c.full_entropy_factor) return 1.0;
    return 1.0 + std::log(fm.phi().weight_cap() * fm.phi().dim()) + std::abs(std::log(c.delta));
}

}  // namespace

double LargeRftlConfig::step(int t, const FeatureModel& fm, const Sampler& sampler) const {
    const double w = fm.phi().weight_cap();
    const double g = t * std::sqrt(static_cast<double>(fm.phi().dim())) + penalty(t) * (sampler.c1() + sampler.c2()) +
                     (t / eta) * entropy_factor(*this, fm) * sampler.c1();
    return step_scale * w / (std::sqrt(static_cast<double>(iterations(t))) * g);
}

double LargeRftlConfig::init_step(const FeatureModel& fm, const Sampler& sampler) const {
    const double w = fm.phi().weight_cap();
    const double g = penalty(1) * (sampler.c1() + sampler.c2()) + entropy_factor(*this, fm) * sampler.c1();
    return step_scale * w / (std::sqrt(static_cast<double>(iterations(1))) * g);
}

LargeRftlConfig theorem2_parameters(int horizon, double tau, int dim, double weight_cap, double c1, double c2,
                                    double practical_scale, Theorem2Preset preset) {
    if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
    if (!(tau > 0.0) || std::isinf(tau))
        throw std::invalid_argument("theorem2 schedule needs a finite positive tau; supply parameters manually");
    if (dim < 1 || !(weight_cap > 0.0) || !(c1 + c2 > 0.0)) throw std::invalid_argument("theorem2 schedule needs dim >= 1, weight_cap > 0 and c1 + c2 > 0");
    const double T = horizon, d = dim, W = weight_cap;
    LargeRftlConfig c;
    c.horizon = horizon;
    c.eta = std::sqrt(T / tau);
    c.delta = std::exp(-std::sqrt(T));
    c.penalty_exp = 1.0;
    c.k_exp = 4.0;
    double base;
    if (preset == Theorem2Preset::Statement) {
        c.penalty_coef = tau * tau * std::pow(T, 0.75);
        base = W * std::sqrt(d) * std::pow(tau, 4) * (c1 + c2) * T * std::log(W * T);
        c.full_entropy_factor = false;
    } else {
        c.penalty_coef = std::sqrt(d * W) * tau * tau * std::pow(T, 0.75);
        base = std::pow(W, 1.5) * d * std::pow(tau, 4) * (c1 + c2) * std::pow(T, 1.5) * std::log(W * T * d);
        c.full_entropy_factor = true;
    }
    c.k_coef = base * base;
    if (practical_scale > 0.0) {
        c.practical_scale = practical_scale;
    } else {
        const double k_final = c.k_coef * std::pow(T, c.k_exp);
        c.practical_scale = k_final > 1e5 ? 1e5 / k_final : 1.0;
    }
    return c;
}

LargeRftlState init_large(std::shared_ptr<const FeatureModel> features, std::shared_ptr<const Sampler> sampler,
                          const LargeRftlConfig& config, std::uint64_t seed) {
    if (!(config.eta > 0.0) || !(config.delta > 0.0) || config.horizon < 1)
        throw std::invalid_argument("large RFTL needs eta > 0, delta > 0 and T >= 1");
    if (!(config.penalty_coef >= 0.0) || !(config.step_scale > 0.0))
        throw std::invalid_argument("large RFTL schedules must be positive");
    const FeatureMap& phi = features->phi();
    const Vector& mass = phi.column_mass();
    const double w = phi.weight_cap();
    LargeRftlState st;
    st.config = config;
    st.rng.seed(seed);
    st.cum_feature = Vector::Zero(phi.dim());
    Vector start = project_theta(Vector::Constant(phi.dim(), 1.0 / phi.dim()), mass, w);

    PenaltyParams p;
    p.entropy_weight = 1.0;
    p.delta = config.delta;
    p.penalty = config.penalty(1);
    p.reward_rounds = 0.0;
    const double bound = gradient_norm_bound(*features, p, *sampler);
    const long long k = config.iterations(1);
    const double step = config.init_step(*features, *sampler);
    GradientMonitor& mon = st.monitor;
    Rng& rng = st.rng;
    auto grad = [&](const Vector& x) {
        Vector g = stochastic_gradient(x, *features, p, *sampler, rng);
        const double ratio = g.norm() / bound;
        ++mon.samples;
        if (ratio > 1.0) ++mon.violations;
        mon.max_ratio = std::max(mon.max_ratio, ratio);
        assert(ratio <= 1.0 + 1e-12);
        return g;
    };
    auto proj = [&](const Vector& x) { return project_theta(x, mass, w); };
    auto res = psga(grad, proj, step, k, start);
    st.theta = std::move(res.average);
    st.last_iterations = k;
    st.last_step = step;
    st.features = std::move(features);
    st.sampler = std::move(sampler);
    return st;
}

int large_rftl_act(const LargeRftlState& state, int s, Rng& rng) {
    const FeatureModel& fm = *state.features;
    const int A = fm.num_actions();
    if (s < 0 || s >= fm.num_states()) throw std::out_of_range("state out of range");
    std::vector<double> row(A);
    for (int a = 0; a < A; ++a) row[a] = std::max(0.0, fm.phi().row_dot(s * A + a, state.theta));
    return sample_index(row.data(), A, rng, 1e-15);
}

int large_rftl_act(LargeRftlState& state, int s) { return large_rftl_act(state, s, state.rng); }

void large_rftl_update(LargeRftlState& st, const Vector& feature_reward) {
    const FeatureModel& fm = *st.features;
    const Sampler& sampler = *st.sampler;
    if (feature_reward.size() != fm.phi().dim()) throw std::invalid_argument("feature reward has wrong size");
    st.cum_feature += feature_reward;
    const int t = st.t;
    auto p = PenaltyParams::round(t, st.config.eta, st.config.delta, st.config.penalty(t), st.cum_feature);
    const double bound = gradient_norm_bound(fm, p, sampler);
    const long long k = st.config.iterations(t);
    const double step = st.config.step(t, fm, sampler);
    const Vector& mass = fm.phi().column_mass();
    const double w = fm.phi().weight_cap();
    GradientMonitor& mon = st.monitor;
    Rng& rng = st.rng;
    auto grad = [&](const Vector& x) {
        Vector g = stochastic_gradient(x, fm, p, sampler, rng);
        const double ratio = g.norm() / bound;
        ++mon.samples;
        if (ratio > 1.0) ++mon.violations;
        mon.max_ratio = std::max(mon.max_ratio, ratio);
        assert(ratio <= 1.0 + 1e-12);
        return g;
    };
    auto proj = [&](const Vector& x) { return project_theta(x, mass, w); };
    auto res = psga(grad, proj, step, k, st.theta);
    st.theta = std::move(res.average);
    st.last_iterations = k;
    st.last_step = step;
    ++st.t;
}

void large_rftl_update_table(LargeRftlState& state, const RewardTable& r) {
    check_reward_bounds(r);
    large_rftl_update(state, state.features->phi().transpose_apply(r));
}

LargeDiagnostics large_diagnostics(const LargeRftlState& state) {
    const FeatureModel& fm = *state.features;
    Vector x = fm.phi().apply(state.theta);
    LargeDiagnostics d;
    d.shortfall = shortfall_penalty(x, state.config.delta);
    d.flow_residual = fm.flow_residual(state.theta);
    d.negative_mass = (-x.array()).max(0.0).sum();
    d.mass = x.sum();
    return d;
}

StationaryPolicy feature_policy(const FeatureModel& fm, const Vector& theta) {
    const int S = fm.num_states(), A = fm.num_actions();
    Matrix p(S, A);
    for (int s = 0; s < S; ++s) {
        double mass = 0.0;
        for (int a = 0; a < A; ++a) mass += (p(s, a) = std::max(0.0, fm.phi().row_dot(s * A + a, theta)));
        if (mass > 1e-15) p.row(s) /= mass;
        else p.row(s).setConstant(1.0 / A);
        p.row(s) /= p.row(s).sum();
    }
    return StationaryPolicy(p);
}

double near_feasible_bound(double tau, double eps1, double eps2, double* eps_used) {
    auto f = [&](double e) { return tau * std::log(1.0 / e) * (2.0 * e + eps2) + 3.0 * e; };
    if (eps_used) *eps_used = eps1;
    if (std::isinf(tau)) return std::numeric_limits<double>::infinity();
    if (eps1 == 0.0 && eps2 == 0.0) return 0.0;
    if (eps1 >= 0.5) return f(eps1);
    const double lo = std::log(std::max(eps1, 1e-300)), hi = std::log(0.5);
    double best_e = std::max(eps1, 1e-300), best = f(best_e);
    const int n = 400;
    for (int i = 1; i <= n; ++i) {
        double e = std::exp(lo + (hi - lo) * i / n);
        double v = f(e);
        if (v < best) {
            best = v;
            best_e = e;
        }
    }
    if (eps1 == 0.0 && best_e <= 1e-300) return std::numeric_limits<double>::infinity();
    if (eps_used) *eps_used = best_e;
    return best;
}

NearFeasibleReport near_feasible_to_occupancy(const MdpModel& model, const Vector& u, double tau, double tol) {
    if (u.size() != model.num_pairs()) throw std::invalid_argument("vector has wrong size");
    NearFeasibleReport r;
    auto pi = policy_from_occupancy(model, u, 1e-15);
    r.occupancy = occupancy_of_policy(model, pi, 1e-13).mass();
    r.distance = (r.occupancy - u).lpNorm<1>();
    r.negative_mass = (-u.array()).max(0.0).sum();
    r.flow_residual = FlowMatrix(model).residual(u).lpNorm<1>();
    r.bound = near_feasible_bound(tau, r.negative_mass, r.flow_residual, &r.eps_used);
    r.vacuous = std::isinf(r.bound);
    r.holds = r.distance <= r.bound + tol;
    return r;
}

ProjectionReport project_onto_feature_occupancy(const FeatureModel& fm, const Vector& theta_tilde, double delta,
                                                const SolverOptions& options) {
    const FeatureMap& phi = fm.phi();
    const int n = phi.num_pairs(), d = phi.dim(), S = fm.num_states();
    const Vector& a = phi.column_mass();
    const double w = phi.weight_cap();
    const bool need_cap = 1.0 / a.minCoeff() > w * (1.0 + 1e-9);
    const int nv = d + 3 * n + (need_cap ? 1 : 0);
    const int nr = 2 * n + S + 1 + (need_cap ? 1 : 0);
    Matrix dense_phi = Matrix(phi.matrix());
    Vector v = phi.apply(theta_tilde);

    // Variables (theta, p, q, s[, slack]) >= 0 with Phi theta - v = p - q.
    Matrix e = Matrix::Zero(nr, nv);
    Vector b = Vector::Zero(nr);
    e.block(0, 0, n, d) = dense_phi;
    e.block(0, d, n, n) = -Matrix::Identity(n, n);
    e.block(0, d + n, n, n) = Matrix::Identity(n, n);
    b.head(n) = v;
    e.block(n, 0, n, d) = dense_phi;
    e.block(n, d + 2 * n, n, n) = -Matrix::Identity(n, n);
    b.segment(n, n).setConstant(delta);
    e.block(2 * n, 0, S, d) = fm.flow_features();
    e.block(2 * n + S, 0, 1, d) = a.transpose();
    b[2 * n + S] = 1.0;
    if (need_cap) {
        e.block(2 * n + S + 1, 0, 1, d).setOnes();
        e(2 * n + S + 1, nv - 1) = 1.0;
        b[2 * n + S + 1] = w;
    }
    BarrierOptions bo;
    bo.gap_tol = options.gap_tol;
    bo.feas_tol = options.feas_tol;
    bo.max_newton = options.max_newton;
    // Variables forced to zero (a thin feasible face) are removed so the barrier has a strict interior.
    auto support = feasible_support(e, b, bo);
    if (!support) throw InfeasiblePolytope("feature occupancy set is empty");
    std::vector<int> cols;
    for (int j = 0; j < nv; ++j)
        if ((*support)[j]) cols.push_back(j);
    const int k = static_cast<int>(cols.size());
    Matrix ek(nr, k);
    for (int j = 0; j < k; ++j) ek.col(j) = e.col(cols[j]);
    auto rows = independent_rows(ek);
    BarrierProblem prob;
    prob.eq.resize(rows.size(), k);
    prob.rhs.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        prob.eq.row(i) = ek.row(rows[i]);
        prob.rhs[i] = b[rows[i]];
    }
    Vector cost = Vector::Zero(nv);
    cost.segment(d, 2 * n).setOnes();
    prob.cost.resize(k);
    for (int j = 0; j < k; ++j) prob.cost[j] = cost[cols[j]];
    prob.lower = Vector::Zero(k);

    Vector full_start = Vector::Constant(nv, 1e-2);
    full_start.head(d) = project_theta(theta_tilde, a, w).cwiseMax(1e-3);
    Vector gap = dense_phi * full_start.head(d) - v;
    full_start.segment(d, n) = gap.cwiseMax(0.0).array() + 1e-2;
    full_start.segment(d + n, n) = (-gap).cwiseMax(0.0).array() + 1e-2;
    full_start.segment(d + 2 * n, n) = ((dense_phi * full_start.head(d)).array() - delta).max(1e-2);
    Vector start(k);
    for (int j = 0; j < k; ++j) start[j] = full_start[cols[j]];

    auto res = solve_barrier(prob, &start, bo);
    log::debug("projection LP: converged ", res.converged, " residual ", res.primal_residual, " newton ",
               res.newton_steps, " kappa ", res.kappa);
    if (!res.converged || res.primal_residual > 1e-6)
        throw InfeasiblePolytope("feature occupancy set looks empty (projection LP did not converge)");

    ProjectionReport out;
    Vector x = Vector::Zero(nv);
    for (int j = 0; j < k; ++j) x[cols[j]] = res.x[j];
    out.theta = x.head(d);
    out.mu = dense_phi * out.theta;
    out.distance = x.segment(d, 2 * n).sum();
    // lambda = -nu is dual feasible (E'lambda <= c) up to the barrier residual; rows dropped as dependent get 0.
    Vector lambda = Vector::Zero(nr);
    for (std::size_t i = 0; i < rows.size(); ++i) lambda[rows[i]] = -res.eq_dual[i];
    out.multiplier_bound = lambda.lpNorm<Eigen::Infinity>();
    out.dual_gap = std::max(0.0, out.distance - b.dot(lambda));
    // Columns removed by the presolve are not covered by the reduced duals.
    out.certified = k == nv;
    return out;
}

}  // namespace omdp
