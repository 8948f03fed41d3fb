#include "omdp/barrier.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace omdp {

namespace {

struct Residual {
    Vector dual;
    Vector primal;
    double norm() const { return std::sqrt(dual.squaredNorm() + primal.squaredNorm()); }
};

Vector barrier_gradient(const BarrierProblem& p, const Vector& x, double kappa) {
    Vector g = p.cost;
    for (int i = 0; i < x.size(); ++i) {
        if (p.entropy.size() != 0 && p.entropy[i] > 0.0) g[i] += p.entropy[i] * (1.0 + std::log(x[i]));
        g[i] -= kappa / (x[i] - p.lower[i]);
    }
    return g;
}

Residual residual_at(const BarrierProblem& p, const Vector& x, const Vector& nu, double kappa) {
    Residual r;
    r.dual = barrier_gradient(p, x, kappa);
    if (p.eq.rows() > 0) r.dual.noalias() += p.eq.transpose() * nu;
    r.primal = p.eq * x - p.rhs;
    return r;
}

}  // namespace

std::vector<int> independent_rows(const Matrix& m, double tol) {
    std::vector<int> rows;
    if (m.rows() == 0) return rows;
    Eigen::ColPivHouseholderQR<Matrix> qr(m.transpose());
    qr.setThreshold(tol);
    const auto rank = qr.rank();
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = 0; k < rank; ++k) rows.push_back(perm[k]);
    std::sort(rows.begin(), rows.end());
    return rows;
}

BarrierResult solve_barrier(const BarrierProblem& p, const Vector* start, const BarrierOptions& opt) {
    const Eigen::Index n = p.cost.size();
    const Eigen::Index m = p.eq.rows();
    if (p.lower.size() != n || (p.entropy.size() != 0 && p.entropy.size() != n) ||
        (m > 0 && p.eq.cols() != n) || p.rhs.size() != m)
        throw std::invalid_argument("barrier problem has inconsistent dimensions");
    for (Eigen::Index i = 0; i < p.entropy.size(); ++i)
        if (p.entropy[i] < 0.0 || (p.entropy[i] > 0.0 && p.lower[i] < 0.0))
            throw std::invalid_argument("entropy terms need nonnegative weights and bounds");

    BarrierResult out;
    Vector x = start ? *start : Vector(p.lower.array() + 1.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        double floor = p.lower[i] + 1e-9 * (1.0 + std::abs(p.lower[i]));
        if (!(x[i] > floor)) x[i] = floor;
    }
    Vector nu = Vector::Zero(m);
    const bool has_entropy = p.entropy.size() != 0;

    double kappa = opt.kappa0;
    double decrement = 0.0;
    const double final_kappa = opt.gap_tol / std::max<Eigen::Index>(n, 1);
    int steps = 0;
    bool last_stage = false;

    while (true) {
        last_stage = kappa <= final_kappa;
        bool centered = false;
        while (steps < opt.max_newton) {
            Vector slack = x - p.lower;
            Vector h(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                h[i] = kappa / (slack[i] * slack[i]);
                if (has_entropy && p.entropy[i] > 0.0) h[i] += p.entropy[i] / x[i];
            }
            Residual r = residual_at(p, x, nu, kappa);
            Vector hinv = h.cwiseInverse();

            Vector dnu = Vector::Zero(m);
            if (m > 0) {
                Matrix eh = p.eq * hinv.asDiagonal();
                Matrix schur = eh * p.eq.transpose();
                Vector rhs = r.primal - eh * r.dual;
                Eigen::LLT<Matrix> llt(schur);
                if (llt.info() == Eigen::Success) {
                    dnu = llt.solve(rhs);
                } else {
                    double reg = 1e-14 * std::max(1.0, schur.diagonal().cwiseAbs().maxCoeff());
                    schur.diagonal().array() += reg;
                    dnu = schur.ldlt().solve(rhs);
                }
            }
            Vector dx = -hinv.cwiseProduct(r.dual + (m > 0 ? Vector(p.eq.transpose() * dnu) : Vector::Zero(n)));
            decrement = dx.dot(h.cwiseProduct(dx));
            double primal_inf = m > 0 ? r.primal.lpNorm<Eigen::Infinity>() : 0.0;
            double center_tol = last_stage ? 1e-3 * opt.gap_tol : 1e-2 * kappa * n;
            if (primal_inf <= opt.feas_tol && decrement <= center_tol) {
                centered = true;
                break;
            }

            double alpha = 1.0;
            for (Eigen::Index i = 0; i < n; ++i)
                if (dx[i] < 0.0) alpha = std::min(alpha, -0.99 * slack[i] / dx[i]);
            const double base = r.norm();
            Vector trial_x, trial_nu;
            bool accepted = false;
            for (int k = 0; k < 80; ++k) {
                trial_x = x + alpha * dx;
                trial_nu = nu + alpha * dnu;
                bool interior = true;
                for (Eigen::Index i = 0; i < n && interior; ++i) interior = trial_x[i] > p.lower[i];
                if (interior && residual_at(p, trial_x, trial_nu, kappa).norm() <= (1.0 - 0.01 * alpha) * base) {
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            ++steps;
            if (!accepted) {
                // Residual stalls at rounding level; accept the tiny step if it stays interior.
                bool interior = true;
                for (Eigen::Index i = 0; i < n && interior; ++i) interior = trial_x[i] > p.lower[i];
                if (!interior) break;
                x = trial_x;
                nu = trial_nu;
                if (primal_inf <= opt.feas_tol) {
                    centered = true;
                    break;
                }
                continue;
            }
            x = trial_x;
            nu = trial_nu;
        }
        if (!centered || last_stage) {
            out.converged = centered && last_stage;
            break;
        }
        kappa = std::max(kappa * opt.kappa_factor, final_kappa);
    }

    Vector slack = x - p.lower;
    out.x = x;
    out.eq_dual = nu;
    out.bound_dual = kappa * slack.cwiseInverse();
    out.kappa = kappa;
    out.gap_bound = static_cast<double>(n) * kappa + 0.5 * decrement;
    out.primal_residual = m > 0 ? (p.eq * x - p.rhs).lpNorm<Eigen::Infinity>() : 0.0;
    out.newton_steps = steps;
    return out;
}

std::optional<std::vector<char>> feasible_support(const Matrix& eq, const Vector& rhs, const BarrierOptions& opt,
                                                  double tol) {
    // max m with x = y + m 1, y >= 0, -1 <= m <= 1 and 1'y <= cap. On the optimal face every y_i
    // that can be positive stays bounded away from zero at the analytic centre.
    const Eigen::Index n = eq.cols(), m = eq.rows();
    const double cap = 10.0 * static_cast<double>(n) * std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
    Matrix e = Matrix::Zero(m + 2, n + 3);
    e.topLeftCorner(m, n) = eq;
    e.block(0, n, m, 1) = eq.rowwise().sum();
    e(m, n) = 1.0;
    e(m, n + 1) = 1.0;
    e.block(m + 1, 0, 1, n).setOnes();
    e(m + 1, n + 2) = 1.0;
    Vector b(m + 2);
    b.head(m) = rhs;
    b[m] = 2.0;
    b[m + 1] = cap;
    auto rows = independent_rows(e);
    BarrierProblem p;
    p.eq.resize(rows.size(), n + 3);
    p.rhs.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        p.eq.row(i) = e.row(rows[i]);
        p.rhs[i] = b[rows[i]];
    }
    p.cost = Vector::Zero(n + 3);
    p.cost[n] = -1.0;
    p.lower = Vector::Zero(n + 3);
    p.lower[n] = -1.0;
    Vector start = Vector::Constant(n + 3, 1.0);
    start[n] = 0.0;
    start[n + 1] = 2.0;
    start[n + 2] = cap - static_cast<double>(n);
    auto res = solve_barrier(p, &start, opt);
    if (!res.converged || res.primal_residual > 1e-8) return std::nullopt;
    std::vector<char> support(n, 1);
    if (res.x[n] > tol) return support;
    if (res.x[n] < -tol) return std::nullopt;  // no nonnegative point
    for (Eigen::Index i = 0; i < n; ++i) support[i] = res.x[i] > tol;
    return support;
}

}  // namespace omdp
