#include "omdp/polytope.hpp"

#include "omdp/log.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace omdp {

namespace {

Matrix full_equality(const FlowMatrix& flow) {
    const int n = flow.num_pairs(), S = flow.num_states();
    Matrix e(S + 1, n);
    e.topRows(S) = flow.matrix().transpose();
    e.row(S).setOnes();
    return e;
}

Vector full_rhs(int num_states) {
    Vector b = Vector::Zero(num_states + 1);
    b[num_states] = 1.0;
    return b;
}

std::vector<char> support_from_flow(const FlowMatrix& flow) {
    const int S = flow.num_states(), A = flow.num_actions();
    auto prob = [&](int s, int a, int next) {
        return flow.matrix()(s * A + a, next) + (s == next ? 1.0 : 0.0);
    };
    std::vector<char> state_alive(S, 1);
    std::vector<char> action_alive(static_cast<std::size_t>(S) * A, 1);
    bool changed = true;
    while (changed) {
        changed = false;
        std::vector<std::vector<int>> adj(S);
        for (int s = 0; s < S; ++s) {
            if (!state_alive[s]) continue;
            for (int a = 0; a < A; ++a) {
                if (!action_alive[s * A + a]) continue;
                for (int n = 0; n < S; ++n)
                    if (state_alive[n] && prob(s, a, n) > 1e-15) adj[s].push_back(n);
            }
            std::sort(adj[s].begin(), adj[s].end());
            adj[s].erase(std::unique(adj[s].begin(), adj[s].end()), adj[s].end());
        }
        int count = 0;
        auto comp = strongly_connected_components(adj, count);
        for (int s = 0; s < S; ++s) {
            if (!state_alive[s]) continue;
            bool any = false;
            for (int a = 0; a < A; ++a) {
                if (!action_alive[s * A + a]) continue;
                bool leaves = false;
                for (int n = 0; n < S && !leaves; ++n)
                    if (prob(s, a, n) > 1e-15 && (!state_alive[n] || comp[n] != comp[s])) leaves = true;
                if (leaves) {
                    action_alive[s * A + a] = 0;
                    changed = true;
                } else {
                    any = true;
                }
            }
            if (!any) {
                state_alive[s] = 0;
                changed = true;
            }
        }
    }
    std::vector<char> support(static_cast<std::size_t>(S) * A, 0);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) support[s * A + a] = state_alive[s] && action_alive[s * A + a];
    return support;
}

std::vector<int> indices_of(const std::vector<char>& mask) {
    std::vector<int> idx;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) idx.push_back(static_cast<int>(i));
    return idx;
}

Matrix select_columns(const Matrix& m, const std::vector<int>& cols) {
    Matrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(cols[j]);
    return out;
}

Matrix select_rows(const Matrix& m, const std::vector<int>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
    return out;
}

Vector select(const Vector& v, const std::vector<int>& idx) {
    Vector out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[idx[i]];
    return out;
}

BarrierOptions barrier_options(const SolverOptions& o, double kappa0) {
    BarrierOptions b;
    b.gap_tol = o.gap_tol;
    b.feas_tol = o.feas_tol;
    b.max_newton = o.max_newton;
    b.kappa0 = kappa0;
    return b;
}

}  // namespace

FlowMatrix::FlowMatrix(const MdpModel& model)
    : num_states_(model.num_states()), num_actions_(model.num_actions()), m_(model.transition()) {
    for (int s = 0; s < num_states_; ++s)
        for (int a = 0; a < num_actions_; ++a) m_(model.pair(s, a), s) -= 1.0;
}

FlowMatrix build_flow_matrix(const MdpModel& model) { return FlowMatrix(model); }

FeasibilityResidual feasibility_residual(const Vector& mu, const FlowMatrix& flow, double delta) {
    if (mu.size() != flow.num_pairs()) throw std::invalid_argument("occupancy has wrong size");
    FeasibilityResidual r;
    r.flow_l1 = flow.residual(mu).lpNorm<1>();
    for (int i = 0; i < mu.size(); ++i) r.shortfall_l1 += std::max(delta - mu[i], 0.0);
    r.mass_gap = std::abs(mu.sum() - 1.0);
    return r;
}

std::vector<char> occupancy_support(const MdpModel& model) { return support_from_flow(FlowMatrix(model)); }

DeltaMaxResult delta_max(const FlowMatrix& flow, const SolverOptions& options) {
    const int n = flow.num_pairs();
    auto support = support_from_flow(flow);
    auto idx = indices_of(support);
    if (idx.empty()) throw InfeasiblePolytope("occupancy polytope is empty");
    const int k = static_cast<int>(idx.size());

    // Variables (x, m) with mu = x + m 1 on the support, x >= 0, m >= -1.
    Matrix e_sub = select_columns(full_equality(flow), idx);
    Matrix e(e_sub.rows(), k + 1);
    e.leftCols(k) = e_sub;
    e.col(k) = e_sub.rowwise().sum();
    auto rows = independent_rows(e);
    BarrierProblem p;
    p.eq = select_rows(e, rows);
    p.rhs = select(full_rhs(flow.num_states()), rows);
    p.cost = Vector::Zero(k + 1);
    p.cost[k] = -1.0;
    p.lower = Vector::Zero(k + 1);
    p.lower[k] = -1.0;
    Vector start = Vector::Constant(k + 1, 0.5 / k);
    auto res = solve_barrier(p, &start, barrier_options(options, 1.0));
    if (!res.converged) throw NonConvergence("delta_max solver did not converge");

    DeltaMaxResult out;
    double m = res.x[k];
    out.certificate = Vector::Zero(n);
    for (int j = 0; j < k; ++j) out.certificate[idx[j]] = res.x[j] + m;
    out.value = k == n ? std::max(0.0, m) : 0.0;
    return out;
}

DeltaMaxResult delta_max(const MdpModel& model, const SolverOptions& options) {
    return delta_max(FlowMatrix(model), options);
}

ShrunkPolytope::ShrunkPolytope(const MdpModel& model, double delta, const SolverOptions& options)
    : ShrunkPolytope(model, delta, delta, omdp::delta_max(FlowMatrix(model), options), options) {}

ShrunkPolytope ShrunkPolytope::with_clamp(const MdpModel& model, double requested_delta,
                                          const SolverOptions& options) {
    auto dm = omdp::delta_max(FlowMatrix(model), options);
    double delta = std::min(requested_delta, 0.5 * dm.value);
    if (delta != requested_delta)
        log::warn("delta clamped from ", requested_delta, " to ", delta, " (0.5 * delta_max, delta_max = ",
                  dm.value, ")");
    return ShrunkPolytope(model, delta, requested_delta, std::move(dm), options);
}

ShrunkPolytope::ShrunkPolytope(const MdpModel& model, double delta, double requested, DeltaMaxResult dm,
                               const SolverOptions&)
    : flow_(model), delta_(delta), requested_delta_(requested), delta_max_(dm.value) {
    if (!(delta >= 0.0)) throw std::invalid_argument("delta must be nonnegative");
    if (delta > 0.0 && !(delta < delta_max_)) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "delta " << delta << " is not below delta_max " << delta_max_;
        throw InfeasiblePolytope(msg.str());
    }
    support_ = support_from_flow(flow_);
    support_index_ = indices_of(support_);
    full_support_ = support_index_.size() == static_cast<std::size_t>(flow_.num_pairs());
    certificate_ = std::move(dm.certificate);

    full_eq_ = full_equality(flow_);
    Matrix sub = select_columns(full_eq_, support_index_);
    auto rows = independent_rows(sub);
    eq_ = select_rows(sub, rows);
    rhs_ = select(full_rhs(flow_.num_states()), rows);

    auto full_rows = independent_rows(full_eq_);
    full_eq_ = select_rows(full_eq_, full_rows);
    gram_.compute(full_eq_ * full_eq_.transpose());
    full_rhs_rows_ = full_rows;
}

Vector ShrunkPolytope::project_affine(const Vector& mu) const {
    Vector b = select(full_rhs(flow_.num_states()), full_rhs_rows_);
    return mu - full_eq_.transpose() * gram_.solve(full_eq_ * mu - b);
}

RftlStepResult solve_regularized(const ShrunkPolytope& poly, const Vector& c, double lambda,
                                 const SolverOptions& options, const Vector* warm) {
    const int n = poly.num_pairs();
    if (c.size() != n) throw std::invalid_argument("objective has wrong size");
    if (!(lambda >= 0.0)) throw std::invalid_argument("regularization weight must be nonnegative");
    const auto& idx = poly.support_index();
    const int k = static_cast<int>(idx.size());

    double scale = std::max(c.lpNorm<Eigen::Infinity>(), lambda);
    if (!(scale > 0.0)) scale = 1.0;

    BarrierProblem p;
    p.cost = -select(c, idx) / scale;
    if (lambda > 0.0) p.entropy = Vector::Constant(k, lambda / scale);
    p.eq = poly.equality();
    p.rhs = poly.rhs();
    p.lower = Vector::Constant(k, poly.delta());

    Vector cert = select(poly.certificate(), idx);
    Vector start = cert;
    double kappa0 = 1.0;
    if (warm) {
        if (warm->size() != n) throw std::invalid_argument("warm start has wrong size");
        start = (1.0 - options.warm_mix) * select(*warm, idx) + options.warm_mix * cert;
        kappa0 = options.warm_kappa;
    }
    auto res = solve_barrier(p, &start, barrier_options(options, kappa0));
    if (!res.converged && warm) res = solve_barrier(p, &cert, barrier_options(options, 1.0));
    if (!res.converged) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "polytope solver did not converge (newton steps " << res.newton_steps << ", kappa " << res.kappa
            << ", primal residual " << res.primal_residual << ")";
        throw NonConvergence(msg.str());
    }

    RftlStepResult out;
    out.mu = Vector::Zero(n);
    for (int j = 0; j < k; ++j) out.mu[idx[j]] = res.x[j];
    out.objective = c.dot(out.mu) - (lambda > 0.0 ? lambda * negative_entropy(out.mu) : 0.0);
    out.gap_bound = res.gap_bound * scale;
    out.newton_steps = res.newton_steps;
    return out;
}

LpResult maximize_linear(const ShrunkPolytope& poly, const Vector& c, const SolverOptions& options) {
    auto r = solve_regularized(poly, c, 0.0, options);
    LpResult out;
    out.mu = std::move(r.mu);
    out.value = c.dot(out.mu);
    out.gap_bound = r.gap_bound;
    out.newton_steps = r.newton_steps;
    return out;
}

LpResult solve_average_reward_lp(const MdpModel& model, const RewardTable& r, const SolverOptions& options) {
    if (r.size() != model.num_pairs()) throw std::invalid_argument("reward table has wrong size");
    check_reward_bounds(r);
    ShrunkPolytope poly(model, 0.0, options);
    return maximize_linear(poly, r, options);
}

double negative_entropy(const Vector& mu) {
    double total = 0.0;
    for (int i = 0; i < mu.size(); ++i) {
        if (mu[i] < 0.0) throw std::invalid_argument("negative entry in entropy argument");
        if (mu[i] > 0.0) total += mu[i] * std::log(mu[i]);
    }
    return total;
}

RftlStepResult solve_rftl_step(const ShrunkPolytope& poly, const RewardTable& cum_reward, int t, double eta,
                               const SolverOptions& options, const Vector* warm) {
    if (t < 0) throw std::invalid_argument("round must be nonnegative");
    if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
    return solve_regularized(poly, cum_reward, std::max(t, 1) / eta, options, warm);
}

double frank_wolfe_gap(const ShrunkPolytope& poly, const Vector& grad, const Vector& mu,
                       const SolverOptions& options) {
    auto best = maximize_linear(poly, grad, options);
    return grad.dot(best.mu - mu);
}

}  // namespace omdp
