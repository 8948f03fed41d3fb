// Log-barrier interior point method for
//   minimize  c'x + sum_i w_i x_i ln x_i   subject to  E x = b,  x > l
// with w >= 0 (w_i > 0 requires l_i >= 0). Covers the LPs and the
// entropy-regularized problems of the exact learner.
#pragma once

#include "omdp/mdp.hpp"

#include <optional>
#include <vector>

namespace omdp {

struct BarrierProblem {
    Vector cost;
    Vector entropy;  // empty means all zero
    Matrix eq;       // rows must be linearly independent, see independent_rows
    Vector rhs;
    Vector lower;
};

struct BarrierOptions {
    double gap_tol = 1e-11;
    double feas_tol = 1e-10;
    double kappa0 = 1.0;
    double kappa_factor = 0.1;
    int max_newton = 3000;
};

struct BarrierResult {
    Vector x;
    Vector eq_dual;     // nu in  c + grad entropy + E'nu - z = 0
    Vector bound_dual;  // z >= 0
    double kappa = 0.0;
    double gap_bound = 0.0;
    double primal_residual = 0.0;
    int newton_steps = 0;
    bool converged = false;
};

/// start may be null or any point; entries are pushed strictly above the bounds.
BarrierResult solve_barrier(const BarrierProblem& problem, const Vector* start,
                            const BarrierOptions& options = {});

/// Variables that are positive somewhere on {E x = b, x >= 0}; nullopt when the set looks empty.
std::optional<std::vector<char>> feasible_support(const Matrix& eq, const Vector& rhs,
                                                  const BarrierOptions& options = {}, double tol = 1e-7);

/// Indices of a maximal linearly independent subset of the rows of m.
std::vector<int> independent_rows(const Matrix& m, double tol = 1e-10);

}  // namespace omdp
