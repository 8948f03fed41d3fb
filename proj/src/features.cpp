#include "omdp/features.hpp"

#include "omdp/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace omdp {

FeatureMap::FeatureMap(int num_pairs, const std::vector<Column>& columns, double weight_cap)
    : weight_cap_(weight_cap) {
    if (num_pairs < 1 || columns.empty()) throw std::invalid_argument("feature map needs pairs and columns");
    if (!(weight_cap > 0.0) || !std::isfinite(weight_cap)) throw std::invalid_argument("weight cap W must be positive");
    std::vector<Eigen::Triplet<double>> trips;
    for (std::size_t j = 0; j < columns.size(); ++j) {
        double sum = 0.0;
        for (const auto& [i, v] : columns[j]) {
            if (i < 0 || i >= num_pairs) {
                std::ostringstream os;
                os << "feature column " << j << " has row index " << i << " outside [0, " << num_pairs << ")";
                throw std::invalid_argument(os.str());
            }
            if (!(v >= 0.0) || !std::isfinite(v)) {
                std::ostringstream os;
                os << "feature column " << j << " has invalid entry " << v << " at row " << i;
                throw std::invalid_argument(os.str());
            }
            sum += v;
            if (v != 0.0) trips.emplace_back(i, static_cast<int>(j), v);
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            std::ostringstream os;
            os.precision(17);
            os << "feature column " << j << " sums to " << sum << ", expected 1";
            throw std::invalid_argument(os.str());
        }
    }
    phi_.resize(num_pairs, static_cast<int>(columns.size()));
    phi_.setFromTriplets(trips.begin(), trips.end());
    phi_.makeCompressed();
    column_mass_ = phi_.transpose() * Vector::Ones(num_pairs);
    row_norms_ = Vector::Zero(num_pairs);
    for (int i = 0; i < num_pairs; ++i) {
        double s = 0.0;
        for (SparseRows::InnerIterator it(phi_, i); it; ++it) s += it.value() * it.value();
        row_norms_[i] = std::sqrt(s);
    }
}

FeatureMap FeatureMap::identity(int num_pairs, double weight_cap) {
    std::vector<Column> cols(num_pairs);
    for (int i = 0; i < num_pairs; ++i) cols[i] = {{i, 1.0}};
    return FeatureMap(num_pairs, cols, weight_cap);
}

FeatureMap FeatureMap::random_sparse(int num_pairs, int dim, int nnz_per_column, double weight_cap,
                                     std::uint64_t seed) {
    if (nnz_per_column < 1 || nnz_per_column > num_pairs) throw std::invalid_argument("bad nnz per column");
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    std::vector<int> rows(num_pairs);
    std::vector<Column> cols(dim);
    for (int j = 0; j < dim; ++j) {
        std::iota(rows.begin(), rows.end(), 0);
        for (int k = 0; k < nnz_per_column; ++k) {
            std::uniform_int_distribution<int> pick(k, num_pairs - 1);
            std::swap(rows[k], rows[pick(rng)]);
        }
        double total = 0.0;
        for (int k = 0; k < nnz_per_column; ++k) {
            cols[j].push_back({rows[k], u(rng)});
            total += cols[j].back().second;
        }
        for (auto& e : cols[j]) e.second /= total;
    }
    return FeatureMap(num_pairs, cols, weight_cap);
}

double FeatureMap::row_dot(int pair, const Vector& theta) const {
    double s = 0.0;
    for (SparseRows::InnerIterator it(phi_, pair); it; ++it) s += it.value() * theta[it.col()];
    return s;
}

void FeatureMap::add_row(int pair, double scale, Vector& out) const {
    for (SparseRows::InnerIterator it(phi_, pair); it; ++it) out[it.col()] += scale * it.value();
}

std::vector<FeatureMap::Column> FeatureMap::columns() const {
    std::vector<Column> cols(dim());
    for (int i = 0; i < num_pairs(); ++i)
        for (SparseRows::InnerIterator it(phi_, i); it; ++it) cols[it.col()].push_back({i, it.value()});
    return cols;
}

FeatureModel::FeatureModel(const MdpModel& model, std::shared_ptr<const FeatureMap> phi)
    : phi_(std::move(phi)), num_states_(model.num_states()), num_actions_(model.num_actions()) {
    if (phi_->num_pairs() != model.num_pairs()) throw std::invalid_argument("feature map rows do not match the model");
    FlowMatrix flow(model);
    Matrix ft = phi_->matrix().transpose() * flow.matrix();
    flow_features_ = ft.transpose();
}

double smoothed_entropy(double x, double delta) {
    if (x >= delta) return x > 0.0 ? x * std::log(x) : 0.0;
    const double ld = std::log(delta);
    return delta * ld + (1.0 + ld) * (x - delta);
}

double smoothed_entropy_derivative(double x, double delta) { return 1.0 + std::log(std::max(x, delta)); }

double smoothed_entropy(const Vector& mu, double delta) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i) s += smoothed_entropy(mu[i], delta);
    return s;
}

double shortfall_penalty(const Vector& mu, double delta) { return (delta - mu.array()).max(0.0).sum(); }

PenaltyParams PenaltyParams::round(int t, double eta, double delta, double penalty, const Vector& cum_feature) {
    PenaltyParams p;
    p.entropy_weight = t / eta;
    p.delta = delta;
    p.penalty = penalty;
    p.reward_rounds = t;
    p.cum_feature = &cum_feature;
    return p;
}

double unpenalized_objective(const Vector& theta, const FeatureModel& fm, const PenaltyParams& p) {
    Vector x = fm.phi().apply(theta);
    double v = -p.entropy_weight * smoothed_entropy(x, p.delta);
    if (p.cum_feature) v += p.cum_feature->dot(theta);
    return v;
}

double penalized_objective(const Vector& theta, const FeatureModel& fm, const PenaltyParams& p) {
    Vector x = fm.phi().apply(theta);
    double v = -p.entropy_weight * smoothed_entropy(x, p.delta);
    if (p.cum_feature) v += p.cum_feature->dot(theta);
    if (p.penalty != 0.0) v -= p.penalty * (fm.flow_residual(theta) + shortfall_penalty(x, p.delta));
    return v;
}

namespace {

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

Vector exact_gradient(const Vector& theta, const FeatureModel& fm, const PenaltyParams& p) {
    const FeatureMap& phi = fm.phi();
    Vector x = phi.apply(theta);
    Vector coef(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        coef[i] = -p.entropy_weight * smoothed_entropy_derivative(x[i], p.delta);
        if (x[i] <= p.delta) coef[i] += p.penalty;
    }
    Vector g = phi.transpose_apply(coef);
    if (p.cum_feature) g += *p.cum_feature;
    if (p.penalty != 0.0) {
        Vector flow = fm.flow_features() * theta;
        Vector sgn = flow.unaryExpr([](double v) { return sign_of(v); });
        g -= p.penalty * (fm.flow_features().transpose() * sgn);
    }
    return g;
}

std::pair<double, double> sampling_constants(const FeatureModel& fm, const Vector& q1, const Vector& q2) {
    const Vector& norms = fm.phi().row_norms();
    if (q1.size() != norms.size() || q2.size() != fm.num_states())
        throw std::invalid_argument("sampling distributions have wrong sizes");
    double c1 = 0.0, c2 = 0.0;
    for (Eigen::Index i = 0; i < norms.size(); ++i) {
        if (norms[i] == 0.0) continue;
        if (!(q1[i] > 0.0)) throw std::invalid_argument("q1 vanishes on a nonzero feature row " + std::to_string(i));
        c1 = std::max(c1, norms[i] / q1[i]);
    }
    for (int s = 0; s < fm.num_states(); ++s) {
        double n = fm.flow_features().row(s).norm();
        if (n == 0.0) continue;
        if (!(q2[s] > 0.0)) throw std::invalid_argument("q2 vanishes on state " + std::to_string(s));
        c2 = std::max(c2, n / q2[s]);
    }
    return {c1, c2};
}

namespace {

Vector normalized_or_uniform(Vector w) {
    double total = w.sum();
    if (!(total > 0.0)) return Vector::Constant(w.size(), 1.0 / w.size());
    return w / total;
}

std::vector<double> cumulative(const Vector& q) {
    std::vector<double> c(q.size());
    double s = 0.0;
    for (Eigen::Index i = 0; i < q.size(); ++i) c[i] = (s += q[i]);
    return c;
}

int draw(const std::vector<double>& cdf, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, cdf.back());
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u(rng));
    if (it == cdf.end()) --it;
    return static_cast<int>(it - cdf.begin());
}

}  // namespace

Sampler::Sampler(const FeatureModel& fm) {
    q1_ = normalized_or_uniform(fm.phi().row_norms());
    q2_ = normalized_or_uniform(fm.flow_features().rowwise().norm());
    finish(fm);
}

Sampler::Sampler(const FeatureModel& fm, Vector q1, Vector q2) : q1_(std::move(q1)), q2_(std::move(q2)) {
    if ((q1_.array() < 0.0).any() || (q2_.array() < 0.0).any())
        throw std::invalid_argument("sampling distributions must be nonnegative");
    if (std::abs(q1_.sum() - 1.0) > 1e-9 || std::abs(q2_.sum() - 1.0) > 1e-9)
        throw std::invalid_argument("sampling distributions must sum to 1");
    finish(fm);
}

void Sampler::finish(const FeatureModel& fm) {
    std::tie(c1_, c2_) = sampling_constants(fm, q1_, q2_);
    cdf1_ = cumulative(q1_);
    cdf2_ = cumulative(q2_);
}

int Sampler::sample_pair(Rng& rng) const { return draw(cdf1_, rng); }
int Sampler::sample_state(Rng& rng) const { return draw(cdf2_, rng); }

Vector stochastic_gradient_at(const Vector& theta, const FeatureModel& fm, const PenaltyParams& p,
                              const Sampler& sampler, int pair, int state) {
    Vector g = p.cum_feature ? *p.cum_feature : Vector::Zero(theta.size());
    const double q1 = sampler.q1()[pair];
    if (q1 > 0.0) {
        const double x = fm.phi().row_dot(pair, theta);
        double coef = -p.entropy_weight * smoothed_entropy_derivative(x, p.delta);
        if (x <= p.delta) coef += p.penalty;
        fm.phi().add_row(pair, coef / q1, g);
    }
    const double q2 = sampler.q2()[state];
    if (p.penalty != 0.0 && q2 > 0.0) {
        auto row = fm.flow_features().row(state);
        const double sgn = sign_of(row.dot(theta.transpose()));
        if (sgn != 0.0) g -= (p.penalty * sgn / q2) * row.transpose();
    }
    return g;
}

Vector stochastic_gradient(const Vector& theta, const FeatureModel& fm, const PenaltyParams& p,
                           const Sampler& sampler, Rng& rng) {
    const int pair = sampler.sample_pair(rng);
    const int state = sampler.sample_state(rng);
    return stochastic_gradient_at(theta, fm, p, sampler, pair, state);
}

double gradient_norm_bound(const FeatureModel& fm, const PenaltyParams& p, const Sampler& sampler) {
    const double d = fm.phi().dim();
    const double w = fm.phi().weight_cap();
    return p.reward_rounds * std::sqrt(d) + p.penalty * (sampler.c1() + sampler.c2()) +
           p.entropy_weight * (1.0 + std::log(w * d) + std::abs(std::log(p.delta))) * sampler.c1();
}

namespace {

// Projection onto {x >= 0, sum x = radius}.
Vector project_scaled_simplex(const Vector& v, double radius) {
    std::vector<double> u(v.data(), v.data() + v.size());
    std::sort(u.begin(), u.end(), std::greater<double>());
    double cum = 0.0, tau = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        cum += u[k];
        double cand = (cum - radius) / static_cast<double>(k + 1);
        if (u[k] - cand > 0.0) tau = cand;
    }
    return (v.array() - tau).max(0.0);
}

struct Clip {
    const Vector& raw;
    const Vector& a;
    double lambda = 0.0;
    double nu = 0.0;

    double mass() const { return ((raw.array() - lambda * a.array() - nu).max(0.0) * a.array()).sum(); }
    double l1() const { return (raw.array() - lambda * a.array() - nu).max(0.0).sum(); }
    Vector point() const { return (raw.array() - lambda * a.array() - nu).max(0.0); }

    // Sets lambda so that a'x = 1 at the current nu.
    void fit_lambda() {
        double hi = ((raw.array() - nu) / a.array()).maxCoeff();
        double step = 1.0;
        double lo = hi - step;
        lambda = lo;
        while (mass() < 1.0) {
            step *= 2.0;
            lo = hi - step;
            lambda = lo;
        }
        for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
            lambda = 0.5 * (lo + hi);
            if (mass() >= 1.0) lo = lambda; else hi = lambda;
        }
        lambda = 0.5 * (lo + hi);
    }
};

}  // namespace

Vector project_theta(const Vector& raw, const Vector& col_mass, double weight_cap, double tol) {
    if (raw.size() != col_mass.size()) throw std::invalid_argument("projection size mismatch");
    if (!(col_mass.array() > 0.0).all()) throw std::invalid_argument("feature column masses must be positive");
    const double amax = col_mass.maxCoeff(), amin = col_mass.minCoeff();
    if (amax * weight_cap < 1.0 - 1e-12) {
        std::ostringstream os;
        os.precision(17);
        os << "feature weight set is empty: W = " << weight_cap << " < 1 / max column mass = " << 1.0 / amax;
        throw std::invalid_argument(os.str());
    }
    if (amax - amin <= 1e-12 * amax) {
        const double radius = 1.0 / amax;
        if (radius > weight_cap * (1.0 + 1e-12)) throw std::invalid_argument("feature weight set is empty");
        return project_scaled_simplex(raw, radius);
    }
    Clip clip{raw, col_mass};
    clip.fit_lambda();
    if (clip.l1() <= weight_cap + tol) return clip.point();
    double lo = 0.0, hi = 1.0;
    for (;;) {
        clip.nu = hi;
        clip.fit_lambda();
        if (clip.l1() <= weight_cap) break;
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) throw std::runtime_error("projection multiplier search diverged");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
        clip.nu = 0.5 * (lo + hi);
        clip.fit_lambda();
        if (clip.l1() > weight_cap) lo = clip.nu; else hi = clip.nu;
    }
    clip.nu = hi;
    clip.fit_lambda();
    return clip.point();
}

double psga_gap_bound(double weight_cap, double grad_bound, long long iterations, int dim, double confidence) {
    const double k = static_cast<double>(iterations);
    const double w2 = weight_cap * weight_cap;
    return weight_cap * grad_bound / std::sqrt(k) +
           std::sqrt((1.0 + 4.0 * w2 * k) * (2.0 * std::log(1.0 / confidence) + dim * std::log(1.0 + w2 * k / dim)) /
                     (k * k));
}

}  // namespace omdp
