#include "omdp/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

namespace omdp {

namespace {

constexpr double kStochasticTol = 1e-12;

const char* kind_name(Violation::Kind kind) {
    switch (kind) {
        case Violation::Kind::RowSum: return "row sum";
        case Violation::Kind::NegativeEntry: return "negative entry";
        case Violation::Kind::NonFinite: return "non-finite entry";
        case Violation::Kind::InitialSum: return "initial distribution sum";
        case Violation::Kind::InitialNegative: return "initial distribution negative entry";
    }
    return "unknown";
}

}  // namespace

std::vector<int> strongly_connected_components(const std::vector<std::vector<int>>& adj, int& count) {
    const int n = static_cast<int>(adj.size());
    std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
    std::vector<char> on_stack(n, 0);
    std::vector<int> stack;
    std::vector<std::pair<int, std::size_t>> work;
    int next_index = 0;
    count = 0;
    for (int root = 0; root < n; ++root) {
        if (index[root] >= 0) continue;
        work.emplace_back(root, 0);
        while (!work.empty()) {
            auto& [v, edge] = work.back();
            if (edge == 0 && index[v] < 0) {
                index[v] = low[v] = next_index++;
                stack.push_back(v);
                on_stack[v] = 1;
            }
            if (edge < adj[v].size()) {
                int w = adj[v][edge++];
                if (index[w] < 0) {
                    work.emplace_back(w, 0);
                } else if (on_stack[w]) {
                    low[v] = std::min(low[v], index[w]);
                }
                continue;
            }
            if (low[v] == index[v]) {
                int w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = 0;
                    comp[w] = count;
                } while (w != v);
                ++count;
            }
            int finished = v;
            work.pop_back();
            if (!work.empty()) {
                int parent = work.back().first;
                low[parent] = std::min(low[parent], low[finished]);
            }
        }
    }
    return comp;
}

namespace {

constexpr int kDirectStationaryLimit = 1000;

// Members of each closed communicating class.
std::vector<std::vector<int>> closed_classes(const Matrix& chain) {
    const int n = static_cast<int>(chain.rows());
    std::vector<std::vector<int>> adj(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (chain(i, j) > 0.0) adj[i].push_back(j);
    int count = 0;
    auto comp = strongly_connected_components(adj, count);
    std::vector<char> leaks(count, 0);
    for (int i = 0; i < n; ++i)
        for (int j : adj[i])
            if (comp[j] != comp[i]) leaks[comp[i]] = 1;
    std::vector<int> slot(count, -1);
    std::vector<std::vector<int>> out;
    for (int i = 0; i < n; ++i) {
        if (leaks[comp[i]]) continue;
        if (slot[comp[i]] < 0) {
            slot[comp[i]] = static_cast<int>(out.size());
            out.emplace_back();
        }
        out[slot[comp[i]]].push_back(i);
    }
    return out;
}

// Grassmann-Taksar-Heyman elimination on the (irreducible) closed class.
Vector stationary_gth(const Matrix& chain, const std::vector<int>& members) {
    const int m = static_cast<int>(members.size());
    Matrix a(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) a(i, j) = chain(members[i], members[j]);
    for (int k = m - 1; k > 0; --k) {
        double s = a.row(k).head(k).sum();
        for (int i = 0; i < k; ++i) a(i, k) /= s;
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) a(i, j) += a(i, k) * a(k, j);
    }
    Vector x = Vector::Zero(m);
    x[0] = 1.0;
    for (int k = 1; k < m; ++k)
        for (int i = 0; i < k; ++i) x[k] += x[i] * a(i, k);
    x /= x.sum();
    Vector nu = Vector::Zero(chain.rows());
    for (int i = 0; i < m; ++i) nu[members[i]] = x[i];
    return nu;
}

}  // namespace

std::string Violation::describe() const {
    std::ostringstream out;
    out << kind_name(kind);
    if (state >= 0) out << " at state " << state;
    if (action >= 0) out << " action " << action;
    if (next_state >= 0) out << " next state " << next_state;
    out.precision(17);
    out << " (value " << value << ")";
    return out.str();
}

std::string ValidationReport::summary() const {
    if (ok()) return "valid";
    std::ostringstream out;
    out << violations.size() << " violation(s):";
    for (const auto& v : violations) out << "\n  " << v.describe();
    return out.str();
}

InvalidModel::InvalidModel(ValidationReport report)
    : std::runtime_error("invalid model: " + report.summary()), report_(std::move(report)) {}

MdpModel::MdpModel(int num_states, int num_actions, Matrix transition, Vector initial_dist)
    : num_states_(num_states),
      num_actions_(num_actions),
      transition_(std::move(transition)),
      initial_(std::move(initial_dist)) {
    if (num_states_ <= 0 || num_actions_ <= 0)
        throw std::invalid_argument("model needs at least one state and one action");
    if (transition_.rows() != num_pairs() || transition_.cols() != num_states_)
        throw std::invalid_argument("transition matrix must be (|S||A|) x |S|");
    if (initial_.size() != num_states_)
        throw std::invalid_argument("initial distribution must have |S| entries");
}

MdpModel MdpModel::checked(int num_states, int num_actions, Matrix transition, Vector initial_dist) {
    MdpModel model(num_states, num_actions, std::move(transition), std::move(initial_dist));
    auto report = validate_model(model);
    if (!report.ok()) throw InvalidModel(std::move(report));
    return model;
}

ValidationReport validate_model(const MdpModel& model) {
    ValidationReport report;
    const int S = model.num_states(), A = model.num_actions();
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            double sum = 0.0;
            bool finite = true;
            for (int n = 0; n < S; ++n) {
                double p = model.prob(s, a, n);
                if (!std::isfinite(p)) {
                    report.violations.push_back({Violation::Kind::NonFinite, s, a, n, p});
                    finite = false;
                    continue;
                }
                if (p < 0.0) report.violations.push_back({Violation::Kind::NegativeEntry, s, a, n, p});
                sum += p;
            }
            if (finite && std::abs(sum - 1.0) > kStochasticTol)
                report.violations.push_back({Violation::Kind::RowSum, s, a, -1, sum});
        }
    }
    double sum = 0.0;
    for (int s = 0; s < S; ++s) {
        double p = model.initial_dist()[s];
        if (!std::isfinite(p)) {
            report.violations.push_back({Violation::Kind::NonFinite, s, -1, -1, p});
            continue;
        }
        if (p < 0.0) report.violations.push_back({Violation::Kind::InitialNegative, s, -1, -1, p});
        sum += p;
    }
    if (std::abs(sum - 1.0) > kStochasticTol)
        report.violations.push_back({Violation::Kind::InitialSum, -1, -1, -1, sum});
    return report;
}

MdpModel flip_model() {
    Matrix p(4, 2);
    p << 1, 0,
         0, 1,
         0, 1,
         1, 0;
    return MdpModel::checked(2, 2, p, Vector::Constant(2, 0.5));
}

MdpModel random_ergodic_model(int num_states, int num_actions, std::uint64_t seed, double min_mass,
                              double alpha) {
    if (min_mass < 0.0 || alpha <= 0.0) throw std::invalid_argument("bad generator parameters");
    Rng rng(seed);
    std::gamma_distribution<double> gamma(alpha, 1.0);
    Matrix p(num_states * num_actions, num_states);
    for (int row = 0; row < p.rows(); ++row) {
        double sum = 0.0;
        for (int n = 0; n < num_states; ++n) sum += p(row, n) = gamma(rng);
        p.row(row) /= sum;
        p.row(row) = p.row(row).cwiseMax(min_mass);
        p.row(row) /= p.row(row).sum();
    }
    return MdpModel::checked(num_states, num_actions, p,
                             Vector::Constant(num_states, 1.0 / num_states));
}

StationaryPolicy::StationaryPolicy(Matrix action_prob) : prob_(std::move(action_prob)) {
    if (prob_.rows() == 0 || prob_.cols() == 0) throw std::invalid_argument("empty policy");
    for (int s = 0; s < prob_.rows(); ++s) {
        if ((prob_.row(s).array() < 0.0).any() || !prob_.row(s).allFinite())
            throw std::invalid_argument("policy row " + std::to_string(s) + " has invalid entries");
        if (std::abs(prob_.row(s).sum() - 1.0) > kStochasticTol)
            throw std::invalid_argument("policy row " + std::to_string(s) + " does not sum to 1");
    }
}

StationaryPolicy StationaryPolicy::uniform(int num_states, int num_actions) {
    return StationaryPolicy(Matrix::Constant(num_states, num_actions, 1.0 / num_actions));
}

StationaryPolicy StationaryPolicy::deterministic(const std::vector<int>& actions, int num_actions) {
    Matrix p = Matrix::Zero(static_cast<int>(actions.size()), num_actions);
    for (std::size_t s = 0; s < actions.size(); ++s) {
        if (actions[s] < 0 || actions[s] >= num_actions) throw std::invalid_argument("action out of range");
        p(static_cast<int>(s), actions[s]) = 1.0;
    }
    return StationaryPolicy(p);
}

OccupancyMeasure::OccupancyMeasure(int num_states, int num_actions, Vector mass)
    : num_states_(num_states), num_actions_(num_actions), mass_(std::move(mass)) {
    if (mass_.size() != num_states_ * num_actions_)
        throw std::invalid_argument("occupancy measure has wrong size");
    if ((mass_.array() < 0.0).any()) throw std::invalid_argument("occupancy measure has negative mass");
    if (std::abs(mass_.sum() - 1.0) > 1e-10) throw std::invalid_argument("occupancy measure mass is not 1");
}

Matrix policy_transition_matrix(const MdpModel& model, const StationaryPolicy& policy) {
    const int S = model.num_states(), A = model.num_actions();
    if (policy.num_states() != S || policy.num_actions() != A)
        throw std::invalid_argument("policy dimensions do not match model");
    Matrix chain = Matrix::Zero(S, S);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            if (policy(s, a) != 0.0) chain.row(s) += policy(s, a) * model.transition().row(model.pair(s, a));
    return chain;
}

double dobrushin_coefficient(const Matrix& chain) {
    double best = 0.0;
    for (int i = 0; i < chain.rows(); ++i)
        for (int j = i + 1; j < chain.rows(); ++j)
            best = std::max(best, 0.5 * (chain.row(i) - chain.row(j)).lpNorm<1>());
    return std::min(best, 1.0);
}

Vector stationary_distribution(const Matrix& chain, double tol) {
    const int n = static_cast<int>(chain.rows());
    if (chain.cols() != n) throw std::invalid_argument("chain must be square");
    auto classes = closed_classes(chain);
    if (classes.size() != 1)
        throw NonUniqueStationary("chain has more than one closed class; stationary distribution is not unique");

    bool lazy = false;
    double kappa = n <= 128 ? dobrushin_coefficient(chain) : 1.0;
    if (kappa >= 1.0) {
        lazy = true;
        kappa = n <= 128 ? dobrushin_coefficient(0.5 * (Matrix::Identity(n, n) + chain)) : 1.0;
    }
    double tau_est = kappa < 1.0 ? (kappa > 0.0 ? -1.0 / std::log(kappa) : 0.0) : 100.0 * n;
    auto cap = static_cast<long>(std::ceil(50.0 * (tau_est + 1.0) * std::log(1.0 / tol)));
    cap = std::max(cap, 100L);
    // Slowly mixing chains that are small enough fall back to direct elimination.
    const bool direct = n <= kDirectStationaryLimit;
    if (direct) cap = std::min(cap, 20000L);

    Eigen::RowVectorXd nu = Eigen::RowVectorXd::Constant(n, 1.0 / n);
    for (long it = 0; it <= cap; ++it) {
        Eigen::RowVectorXd moved = nu * chain;
        if ((moved - nu).lpNorm<1>() <= tol) return nu.transpose();
        nu = lazy ? Eigen::RowVectorXd(0.5 * (nu + moved)) : moved;
        nu /= nu.sum();
    }
    if (direct) {
        Vector x = stationary_gth(chain, classes[0]);
        double res = (x.transpose() * chain - x.transpose()).lpNorm<1>();
        if (res <= std::max(tol, 1e-12)) return x;
    }
    throw NonConvergence("power iteration did not reach tolerance within " + std::to_string(cap) +
                         " iterations");
}

Vector stationary_distribution(const MdpModel& model, const StationaryPolicy& policy, double tol) {
    return stationary_distribution(policy_transition_matrix(model, policy), tol);
}

OccupancyMeasure occupancy_of_policy(const MdpModel& model, const StationaryPolicy& policy, double tol) {
    Vector nu = stationary_distribution(model, policy, tol);
    const int S = model.num_states(), A = model.num_actions();
    Vector mu(S * A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) mu[model.pair(s, a)] = std::max(0.0, nu[s]) * policy(s, a);
    mu /= mu.sum();
    return OccupancyMeasure(S, A, mu);
}

StationaryPolicy policy_from_occupancy(const MdpModel& model, const Vector& mu, double zero_mass) {
    const int S = model.num_states(), A = model.num_actions();
    if (mu.size() != S * A) throw std::invalid_argument("occupancy has wrong size");
    Matrix p(S, A);
    for (int s = 0; s < S; ++s) {
        double mass = 0.0;
        for (int a = 0; a < A; ++a) mass += std::max(0.0, mu[model.pair(s, a)]);
        for (int a = 0; a < A; ++a)
            p(s, a) = mass > zero_mass ? std::max(0.0, mu[model.pair(s, a)]) / mass : 1.0 / A;
        p.row(s) /= p.row(s).sum();
    }
    return StationaryPolicy(p);
}

StationaryPolicy policy_from_occupancy(const MdpModel& model, const OccupancyMeasure& mu) {
    return policy_from_occupancy(model, mu.mass());
}

MixingEstimate mixing_from_contraction(double kappa) {
    MixingEstimate m;
    m.contraction = kappa;
    if (kappa <= 0.0) {
        m.tau = 0.0;
    } else if (kappa >= 1.0) {
        m.tau = std::numeric_limits<double>::infinity();
        m.assumption_violated = true;
    } else {
        m.tau = -1.0 / std::log(kappa);
    }
    return m;
}

MixingEstimate mixing_coefficient(const MdpModel& model, ExactMixing) {
    // Rows of P^pi for deterministic pi pick one action per state independently,
    // so the maximum over policies is a maximum over pairs of (state, action) rows.
    const int S = model.num_states(), A = model.num_actions();
    const Matrix& p = model.transition();
    double kappa = 0.0;
    for (int s = 0; s < S; ++s)
        for (int t = s + 1; t < S; ++t)
            for (int a = 0; a < A; ++a)
                for (int b = 0; b < A; ++b)
                    kappa = std::max(kappa, 0.5 * (p.row(model.pair(s, a)) - p.row(model.pair(t, b))).lpNorm<1>());
    return mixing_from_contraction(std::min(kappa, 1.0));
}

MixingEstimate mixing_coefficient(const MdpModel& model, SampledMixing mode) {
    Rng rng(mode.seed);
    std::uniform_int_distribution<int> pick(0, model.num_actions() - 1);
    double kappa = 0.0;
    std::vector<int> actions(model.num_states());
    for (int i = 0; i < mode.samples; ++i) {
        for (auto& a : actions) a = pick(rng);
        auto policy = StationaryPolicy::deterministic(actions, model.num_actions());
        kappa = std::max(kappa, dobrushin_coefficient(policy_transition_matrix(model, policy)));
    }
    return mixing_from_contraction(kappa);
}

void check_reward_bounds(const RewardTable& r, double slack) {
    for (int i = 0; i < r.size(); ++i)
        if (!std::isfinite(r[i]) || std::abs(r[i]) > 1.0 + slack)
            throw std::invalid_argument("reward entry " + std::to_string(i) + " outside [-1, 1]");
}

double long_run_average_reward(const Vector& mu, const RewardTable& r) {
    if (mu.size() != r.size()) throw std::invalid_argument("reward table size mismatch");
    check_reward_bounds(r);
    return mu.dot(r);
}

double long_run_average_reward(const OccupancyMeasure& mu, const RewardTable& r) {
    return long_run_average_reward(mu.mass(), r);
}

int sample_index(const double* weights, int n, Rng& rng, double zero_mass) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += std::max(0.0, weights[i]);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (total <= zero_mass) {
        int k = static_cast<int>(unit(rng) * n);
        return std::min(k, n - 1);
    }
    double u = unit(rng) * total;
    int last = 0;
    for (int i = 0; i < n; ++i) {
        double w = std::max(0.0, weights[i]);
        if (w <= 0.0) continue;
        last = i;
        if (u < w) return i;
        u -= w;
    }
    return last;
}

}  // namespace omdp
