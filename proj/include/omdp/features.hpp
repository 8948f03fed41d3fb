// Feature map Phi, the penalized objective over feature weights, and PSGA.
#pragma once

#include "omdp/mdp.hpp"

#include <Eigen/SparseCore>

#include <memory>
#include <utility>
#include <vector>

namespace omdp {

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// |S||A| x d, nonnegative, column-stochastic, stored by rows.
class FeatureMap {
public:
    using Column = std::vector<std::pair<int, double>>;

    FeatureMap(int num_pairs, const std::vector<Column>& columns, double weight_cap);

    static FeatureMap identity(int num_pairs, double weight_cap = 1.0);

    /// Each column has nnz_per_column random rows with uniform-then-normalized values.
    static FeatureMap random_sparse(int num_pairs, int dim, int nnz_per_column, double weight_cap, std::uint64_t seed);

    int dim() const { return static_cast<int>(phi_.cols()); }
    int num_pairs() const { return static_cast<int>(phi_.rows()); }
    double weight_cap() const { return weight_cap_; }
    const SparseRows& matrix() const { return phi_; }
    const Vector& column_mass() const { return column_mass_; }
    const Vector& row_norms() const { return row_norms_; }

    double row_dot(int pair, const Vector& theta) const;
    /// out += scale * Phi[pair, :]
    void add_row(int pair, double scale, Vector& out) const;

    Vector apply(const Vector& theta) const { return phi_ * theta; }
    Vector transpose_apply(const Vector& r) const { return phi_.transpose() * r; }

    std::vector<Column> columns() const;

private:
    SparseRows phi_;
    double weight_cap_;
    Vector column_mass_;
    Vector row_norms_;
};

/// Phi together with the model-dependent (P - B)' Phi, one row per state.
class FeatureModel {
public:
    FeatureModel(const MdpModel& model, std::shared_ptr<const FeatureMap> phi);

    const FeatureMap& phi() const { return *phi_; }
    std::shared_ptr<const FeatureMap> phi_ptr() const { return phi_; }
    int num_states() const { return num_states_; }
    int num_actions() const { return num_actions_; }
    const RowMatrix& flow_features() const { return flow_features_; }

    /// ||(Phi theta)'(P - B)||_1
    double flow_residual(const Vector& theta) const { return (flow_features_ * theta).lpNorm<1>(); }

private:
    std::shared_ptr<const FeatureMap> phi_;
    int num_states_;
    int num_actions_;
    RowMatrix flow_features_;
};

/// x ln x for x >= delta, tangent line below.
double smoothed_entropy(double x, double delta);
double smoothed_entropy_derivative(double x, double delta);
double smoothed_entropy(const Vector& mu, double delta);

/// sum max(delta - mu, 0)
double shortfall_penalty(const Vector& mu, double delta);

struct PenaltyParams {
    double entropy_weight = 0.0;  // t / eta in a round, 1 at initialization
    double delta = 0.0;
    double penalty = 0.0;         // H_t
    double reward_rounds = 0.0;   // number of reward tables summed into cum_feature
    const Vector* cum_feature = nullptr;  // Phi' sum_i r_i, length d; null means zero

    static PenaltyParams round(int t, double eta, double delta, double penalty, const Vector& cum_feature);
};

/// c(theta) = <cum, Phi theta> - w R^delta(Phi theta) - H ||(Phi theta)'(P-B)||_1 - H shortfall(Phi theta).
double penalized_objective(const Vector& theta, const FeatureModel& fm, const PenaltyParams& p);

/// The same objective with H = 0.
double unpenalized_objective(const Vector& theta, const FeatureModel& fm, const PenaltyParams& p);

/// Full (sub)gradient. sign(0) = 0, the shortfall indicator is 1 at exactly delta.
Vector exact_gradient(const Vector& theta, const FeatureModel& fm, const PenaltyParams& p);

class Sampler {
public:
    /// q1 proportional to ||Phi rows||_2, q2 proportional to ||(P-B)'Phi rows||_2.
    explicit Sampler(const FeatureModel& fm);
    Sampler(const FeatureModel& fm, Vector q1, Vector q2);

    const Vector& q1() const { return q1_; }
    const Vector& q2() const { return q2_; }
    double c1() const { return c1_; }
    double c2() const { return c2_; }

    int sample_pair(Rng& rng) const;
    int sample_state(Rng& rng) const;

private:
    void finish(const FeatureModel& fm);

    Vector q1_;
    Vector q2_;
    std::vector<double> cdf1_;
    std::vector<double> cdf2_;
    double c1_ = 0.0;
    double c2_ = 0.0;
};

/// (C1, C2) for the given distributions; throws if q vanishes where a numerator does not.
std::pair<double, double> sampling_constants(const FeatureModel& fm, const Vector& q1, const Vector& q2);

/// g for a fixed draw (pair, state).
Vector stochastic_gradient_at(const Vector& theta, const FeatureModel& fm, const PenaltyParams& p,
                              const Sampler& sampler, int pair, int state);
Vector stochastic_gradient(const Vector& theta, const FeatureModel& fm, const PenaltyParams& p,
                           const Sampler& sampler, Rng& rng);

/// t sqrt(d) + H (C1 + C2) + w (1 + ln(W d) + |ln delta|) C1, with t = reward_rounds.
double gradient_norm_bound(const FeatureModel& fm, const PenaltyParams& p, const Sampler& sampler);

/// Euclidean projection onto {theta >= 0, sum theta <= W, a'theta = 1}.
Vector project_theta(const Vector& raw, const Vector& col_mass, double weight_cap, double tol = 1e-12);

/// High-probability PSGA gap after K steps with step W / (sqrt(K) G').
double psga_gap_bound(double weight_cap, double grad_bound, long long iterations, int dim, double confidence);

struct PsgaResult {
    Vector average;
    Vector last;
    long long iterations = 0;
};

/// x_{k+1} = project(x_k + step * grad(x_k)); returns the mean of x_2 .. x_{K+1}.
template <class Gradient, class Projection>
PsgaResult psga(Gradient&& grad, Projection&& project, double step, long long iterations, const Vector& init) {
    if (iterations < 1) throw std::invalid_argument("psga needs at least one iteration");
    if (!(step > 0.0)) throw std::invalid_argument("psga step must be positive");
    PsgaResult res;
    Vector x = init;
    res.average = Vector::Zero(init.size());
    for (long long k = 1; k <= iterations; ++k) {
        x = project(Vector(x + step * grad(x)));
        res.average += (x - res.average) / static_cast<double>(k);
    }
    res.last = std::move(x);
    res.iterations = iterations;
    return res;
}

}  // namespace omdp
