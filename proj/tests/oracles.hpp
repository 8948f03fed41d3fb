// Independent reference computations used only by tests.
#pragma once

#include "omdp/mdp.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace oracle {

using omdp::Matrix;
using omdp::Vector;

// Solves nu (P - I) = 0, sum nu = 1 by a direct least-squares solve.
inline Vector stationary_direct(const Matrix& chain) {
    const auto n = chain.rows();
    Matrix a(n + 1, n);
    a.topRows(n) = chain.transpose() - Matrix::Identity(n, n);
    a.row(n).setOnes();
    Vector b = Vector::Zero(n + 1);
    b[n] = 1.0;
    return a.colPivHouseholderQr().solve(b);
}

inline Matrix chain_of(const omdp::MdpModel& m, const Matrix& pi) {
    Matrix c = Matrix::Zero(m.num_states(), m.num_states());
    for (int s = 0; s < m.num_states(); ++s)
        for (int a = 0; a < m.num_actions(); ++a)
            for (int n = 0; n < m.num_states(); ++n) c(s, n) += pi(s, a) * m.prob(s, a, n);
    return c;
}

inline Vector occupancy_direct(const omdp::MdpModel& m, const Matrix& pi) {
    Vector nu = stationary_direct(chain_of(m, pi));
    Vector mu(m.num_pairs());
    for (int s = 0; s < m.num_states(); ++s)
        for (int a = 0; a < m.num_actions(); ++a) mu[s * m.num_actions() + a] = nu[s] * pi(s, a);
    return mu;
}

inline void for_each_deterministic(int S, int A, const std::function<void(const Matrix&)>& fn) {
    std::vector<int> act(S, 0);
    while (true) {
        Matrix pi = Matrix::Zero(S, A);
        for (int s = 0; s < S; ++s) pi(s, act[s]) = 1.0;
        fn(pi);
        int s = 0;
        while (s < S && ++act[s] == A) act[s++] = 0;
        if (s == S) break;
    }
}

// Best average reward over deterministic stationary policies.
inline double best_deterministic_value(const omdp::MdpModel& m, const Vector& r) {
    double best = -std::numeric_limits<double>::infinity();
    for_each_deterministic(m.num_states(), m.num_actions(),
                           [&](const Matrix& pi) { best = std::max(best, occupancy_direct(m, pi).dot(r)); });
    return best;
}

inline Vector random_rewards(int n, omdp::Rng& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vector r(n);
    for (int i = 0; i < n; ++i) r[i] = u(rng);
    return r;
}

}  // namespace oracle
