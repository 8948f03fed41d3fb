// Finite MDPs, stationary policies, occupancy measures and mixing.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace omdp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Reward table indexed by pair index s * |A| + a.
using RewardTable = Vector;

struct Violation {
    enum class Kind { RowSum, NegativeEntry, NonFinite, InitialSum, InitialNegative };
    Kind kind;
    int state = -1;
    int action = -1;
    int next_state = -1;
    double value = 0.0;

    std::string describe() const;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    std::string summary() const;
};

class InvalidModel : public std::runtime_error {
public:
    explicit InvalidModel(ValidationReport report);
    const ValidationReport& report() const { return report_; }

private:
    ValidationReport report_;
};

/// Known environment. Transition rows are indexed by pair s * |A| + a.
class MdpModel {
public:
    /// Only checks shapes; use validate_model or checked() for stochasticity.
    MdpModel(int num_states, int num_actions, Matrix transition, Vector initial_dist);

    /// Builds and validates, throwing InvalidModel on failure.
    static MdpModel checked(int num_states, int num_actions, Matrix transition, Vector initial_dist);

    int num_states() const { return num_states_; }
    int num_actions() const { return num_actions_; }
    int num_pairs() const { return num_states_ * num_actions_; }
    int pair(int s, int a) const { return s * num_actions_ + a; }

    double prob(int s, int a, int next) const { return transition_(pair(s, a), next); }
    const Matrix& transition() const { return transition_; }
    const Vector& initial_dist() const { return initial_; }

private:
    int num_states_;
    int num_actions_;
    Matrix transition_;
    Vector initial_;
};

ValidationReport validate_model(const MdpModel& model);

/// Two states; action 0 stays, action 1 switches. Uniform initial distribution.
MdpModel flip_model();

/// Rows drawn from a symmetric Dirichlet(alpha), floored at min_mass and renormalized.
MdpModel random_ergodic_model(int num_states, int num_actions, std::uint64_t seed,
                              double min_mass = 0.05, double alpha = 1.0);

class StationaryPolicy {
public:
    explicit StationaryPolicy(Matrix action_prob);

    static StationaryPolicy uniform(int num_states, int num_actions);
    static StationaryPolicy deterministic(const std::vector<int>& actions, int num_actions);

    int num_states() const { return static_cast<int>(prob_.rows()); }
    int num_actions() const { return static_cast<int>(prob_.cols()); }
    double operator()(int s, int a) const { return prob_(s, a); }
    const Matrix& matrix() const { return prob_; }

private:
    Matrix prob_;
};

class OccupancyMeasure {
public:
    OccupancyMeasure(int num_states, int num_actions, Vector mass);

    int num_states() const { return num_states_; }
    int num_actions() const { return num_actions_; }
    double operator()(int s, int a) const { return mass_[s * num_actions_ + a]; }
    const Vector& mass() const { return mass_; }

private:
    int num_states_;
    int num_actions_;
    Vector mass_;
};

class NonUniqueStationary : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NonConvergence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct MixingEstimate {
    double contraction = 0.0;
    double tau = 0.0;
    bool assumption_violated = false;
};

struct ExactMixing {};
struct SampledMixing {
    int samples = 1000;
    std::uint64_t seed = 0;
};

Matrix policy_transition_matrix(const MdpModel& model, const StationaryPolicy& policy);

/// Power iteration on a row-stochastic matrix. Throws NonUniqueStationary when
/// the chain has more than one closed class, NonConvergence when the cap is hit.
Vector stationary_distribution(const Matrix& chain, double tol = 1e-10);
Vector stationary_distribution(const MdpModel& model, const StationaryPolicy& policy,
                               double tol = 1e-10);

OccupancyMeasure occupancy_of_policy(const MdpModel& model, const StationaryPolicy& policy,
                                     double tol = 1e-10);

/// Rows with mass above zero_mass are normalized, the rest are uniform.
StationaryPolicy policy_from_occupancy(const MdpModel& model, const Vector& mu,
                                       double zero_mass = 0.0);
StationaryPolicy policy_from_occupancy(const MdpModel& model, const OccupancyMeasure& mu);

/// max over row pairs of half the l1 distance.
double dobrushin_coefficient(const Matrix& chain);

MixingEstimate mixing_from_contraction(double kappa);
MixingEstimate mixing_coefficient(const MdpModel& model, ExactMixing = {});
MixingEstimate mixing_coefficient(const MdpModel& model, SampledMixing mode);

double long_run_average_reward(const Vector& mu, const RewardTable& r);
double long_run_average_reward(const OccupancyMeasure& mu, const RewardTable& r);

/// Throws std::invalid_argument when some |r(s,a)| exceeds 1 (plus slack).
void check_reward_bounds(const RewardTable& r, double slack = 1e-12);

/// Tarjan's algorithm; returns the component id of each node and sets count.
std::vector<int> strongly_connected_components(const std::vector<std::vector<int>>& adj, int& count);

/// Samples an index from nonnegative weights; uniform when the total is <= zero_mass.
int sample_index(const double* weights, int n, Rng& rng, double zero_mass = 1e-15);

}  // namespace omdp
