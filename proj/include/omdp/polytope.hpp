// Occupancy polytope Delta_M, its delta-shrunk version, and solvers over it.
#pragma once

#include "omdp/barrier.hpp"
#include "omdp/mdp.hpp"

#include <memory>
#include <stdexcept>
#include <vector>

namespace omdp {

struct SolverOptions {
    double feas_tol = 1e-10;
    double gap_tol = 1e-11;  // relative to the normalized objective
    int max_newton = 3000;
    double warm_mix = 1e-3;  // weight of the interior certificate blended into warm starts
    double warm_kappa = 1e-4;
};

class InfeasiblePolytope : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Rows (s,a), columns s': P(s'|s,a) - 1{s = s'}.
class FlowMatrix {
public:
    explicit FlowMatrix(const MdpModel& model);

    int num_states() const { return num_states_; }
    int num_actions() const { return num_actions_; }
    int num_pairs() const { return num_states_ * num_actions_; }
    const Matrix& matrix() const { return m_; }

    /// mu'(P - B), one entry per state.
    Vector residual(const Vector& mu) const { return m_.transpose() * mu; }

private:
    int num_states_;
    int num_actions_;
    Matrix m_;
};

FlowMatrix build_flow_matrix(const MdpModel& model);

struct FeasibilityResidual {
    double flow_l1 = 0.0;
    double shortfall_l1 = 0.0;
    double mass_gap = 0.0;

    bool within(double tol) const { return flow_l1 <= tol && shortfall_l1 <= tol && mass_gap <= tol; }
};

FeasibilityResidual feasibility_residual(const Vector& mu, const FlowMatrix& flow, double delta);

/// Pairs (s,a) that some stationary policy can visit with positive long-run
/// frequency (the union of end components).
std::vector<char> occupancy_support(const MdpModel& model);

struct DeltaMaxResult {
    double value = 0.0;
    Vector certificate;  // a point of Delta_M whose smallest entry is value
};

/// Largest m such that some mu in Delta_M has mu >= m entrywise.
DeltaMaxResult delta_max(const FlowMatrix& flow, const SolverOptions& options = {});
DeltaMaxResult delta_max(const MdpModel& model, const SolverOptions& options = {});

/// Delta_{M,delta} with a stored interior certificate and the reduced equality system.
class ShrunkPolytope {
public:
    /// Uses delta exactly; throws InfeasiblePolytope when delta > 0 and delta >= delta_0.
    ShrunkPolytope(const MdpModel& model, double delta, const SolverOptions& options = {});

    /// delta <- min(requested, 0.5 * delta_0), logged when the clamp changes it.
    static ShrunkPolytope with_clamp(const MdpModel& model, double requested_delta,
                                     const SolverOptions& options = {});

    const FlowMatrix& flow() const { return flow_; }
    int num_pairs() const { return flow_.num_pairs(); }
    double delta() const { return delta_; }
    double requested_delta() const { return requested_delta_; }
    bool clamped() const { return delta_ != requested_delta_; }
    double delta_max() const { return delta_max_; }
    const Vector& certificate() const { return certificate_; }
    const std::vector<char>& support() const { return support_; }
    bool full_support() const { return full_support_; }

    /// Independent rows of [(P - B)'; 1'] restricted to the support, and the right-hand side.
    const Matrix& equality() const { return eq_; }
    const Vector& rhs() const { return rhs_; }
    const std::vector<int>& support_index() const { return support_index_; }

    /// Euclidean projection onto the affine hull {sum = 1, mu'(P - B) = 0}.
    Vector project_affine(const Vector& mu) const;

    FeasibilityResidual residual(const Vector& mu) const { return feasibility_residual(mu, flow_, delta_); }

private:
    ShrunkPolytope(const MdpModel& model, double delta, double requested, DeltaMaxResult dm,
                   const SolverOptions& options);

    FlowMatrix flow_;
    double delta_;
    double requested_delta_;
    double delta_max_;
    Vector certificate_;
    std::vector<char> support_;
    bool full_support_;
    std::vector<int> support_index_;
    Matrix eq_;
    Vector rhs_;
    Matrix full_eq_;
    std::vector<int> full_rhs_rows_;
    Eigen::LDLT<Matrix> gram_;
};

struct LpResult {
    double value = 0.0;
    Vector mu;
    double gap_bound = 0.0;
    int newton_steps = 0;
};

/// max <c, mu> over the polytope; c may have any scale.
LpResult maximize_linear(const ShrunkPolytope& polytope, const Vector& c, const SolverOptions& options = {});

/// rho* = max over Delta_M of <r, mu>.
LpResult solve_average_reward_lp(const MdpModel& model, const RewardTable& r, const SolverOptions& options = {});

/// sum mu ln mu with 0 ln 0 = 0; throws on negative entries.
double negative_entropy(const Vector& mu);

struct RftlStepResult {
    Vector mu;
    double objective = 0.0;
    double gap_bound = 0.0;
    int newton_steps = 0;
};

/// argmax over the polytope of <cum_reward, mu> - (t / eta) R(mu).
RftlStepResult solve_rftl_step(const ShrunkPolytope& polytope, const RewardTable& cum_reward, int t,
                               double eta, const SolverOptions& options = {}, const Vector* warm = nullptr);

/// Generic form: argmax <c, mu> - lambda R(mu).
RftlStepResult solve_regularized(const ShrunkPolytope& polytope, const Vector& c, double lambda,
                                 const SolverOptions& options = {}, const Vector* warm = nullptr);

/// max over v in the polytope of <grad, v - mu>.
double frank_wolfe_gap(const ShrunkPolytope& polytope, const Vector& grad, const Vector& mu,
                       const SolverOptions& options = {});

}  // namespace omdp
