#include "omdp/mdp.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace omdp;

namespace {

MdpModel lazy_cycle() {
    Matrix p = Matrix::Zero(6, 3);
    for (int s = 0; s < 3; ++s)
        for (int a = 0; a < 2; ++a) {
            p(s * 2 + a, s) = 0.5;
            p(s * 2 + a, (s + 1) % 3) += 0.25;
            p(s * 2 + a, (s + 2) % 3) += 0.25;
        }
    return MdpModel::checked(3, 2, p, Vector::Constant(3, 1.0 / 3));
}

StationaryPolicy random_policy(int S, int A, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix p(S, A);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) p(s, a) = u(rng) + 1e-3;
        p.row(s) /= p.row(s).sum();
    }
    return StationaryPolicy(p);
}

Vector random_distribution(int n, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = u(rng);
    return v / v.sum();
}

}  // namespace

TEST_CASE("validate_model reports stochasticity violations") {
    Matrix p(4, 2);
    p << 0.5, 0.5, 1, 0, 0, 1, 0.3, 0.7;
    CHECK(validate_model(MdpModel(2, 2, p, Vector::Constant(2, 0.5))).ok());

    Matrix short_row = p;
    short_row(1, 0) = 0.9;
    auto report = validate_model(MdpModel(2, 2, short_row, Vector::Constant(2, 0.5)));
    REQUIRE(report.violations.size() == 1);
    CHECK(report.violations[0].kind == Violation::Kind::RowSum);
    CHECK(report.violations[0].state == 0);
    CHECK(report.violations[0].action == 1);

    Matrix negative = p;
    negative(3, 0) = -0.1;
    negative(3, 1) = 1.1;
    report = validate_model(MdpModel(2, 2, negative, Vector::Constant(2, 0.5)));
    REQUIRE(!report.ok());
    CHECK(report.violations[0].kind == Violation::Kind::NegativeEntry);
    CHECK(report.violations[0].state == 1);
    CHECK(report.violations[0].next_state == 0);

    CHECK_THROWS_AS(MdpModel::checked(2, 2, short_row, Vector::Constant(2, 0.5)), InvalidModel);
    CHECK_THROWS_AS(MdpModel(2, 2, Matrix::Zero(3, 2), Vector::Constant(2, 0.5)), std::invalid_argument);
}

TEST_CASE("policy transition matrix on FLIP") {
    auto flip = flip_model();
    Matrix swap_m(2, 2);
    swap_m << 0, 1, 1, 0;
    CHECK(policy_transition_matrix(flip, StationaryPolicy::deterministic({1, 1}, 2)).isApprox(swap_m));
    CHECK(policy_transition_matrix(flip, StationaryPolicy::uniform(2, 2)).isApprox(Matrix::Constant(2, 2, 0.5)));
    CHECK(policy_transition_matrix(flip, StationaryPolicy::deterministic({0, 0}, 2)).isApprox(Matrix::Identity(2, 2)));
    CHECK_THROWS_AS(policy_transition_matrix(flip, StationaryPolicy::uniform(3, 2)), std::invalid_argument);
}

TEST_CASE("stationary distributions") {
    auto flip = flip_model();
    Vector nu = stationary_distribution(flip, StationaryPolicy::uniform(2, 2));
    CHECK(nu[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(stationary_distribution(flip, StationaryPolicy::deterministic({0, 0}, 2)), NonUniqueStationary);

    // Periodic but irreducible: unique stationary distribution.
    Vector periodic = stationary_distribution(flip, StationaryPolicy::deterministic({1, 1}, 2));
    CHECK(periodic[0] == doctest::Approx(0.5).epsilon(1e-9));

    auto walk = lazy_cycle();
    auto pi = StationaryPolicy::uniform(3, 2);
    Vector got = stationary_distribution(walk, pi, 1e-12);
    Vector want = oracle::stationary_direct(oracle::chain_of(walk, pi.matrix()));
    CHECK((got - want).lpNorm<Eigen::Infinity>() < 1e-10);
    CHECK(got[1] == doctest::Approx(1.0 / 3).epsilon(1e-10));
}

TEST_CASE("stationary residual meets tolerance on random chains") {
    Rng rng(11);
    for (int k = 0; k < 20; ++k) {
        auto m = random_ergodic_model(5, 3, 100 + k);
        auto pi = random_policy(5, 3, rng);
        for (double tol : {1e-6, 1e-10, 1e-13}) {
            Matrix chain = policy_transition_matrix(m, pi);
            Eigen::RowVectorXd nu = stationary_distribution(chain, tol).transpose();
            CHECK((nu * chain - nu).lpNorm<1>() <= tol);
            CHECK(nu.sum() == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("occupancy of policy") {
    auto flip = flip_model();
    auto mu = occupancy_of_policy(flip, StationaryPolicy::uniform(2, 2));
    for (int i = 0; i < 4; ++i) CHECK(mu.mass()[i] == doctest::Approx(0.25).epsilon(1e-12));
    auto sw = occupancy_of_policy(flip, StationaryPolicy::deterministic({1, 1}, 2));
    CHECK(sw(0, 1) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(sw(1, 1) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(sw(0, 0) == 0.0);
    CHECK(sw(1, 0) == 0.0);

    auto walk = lazy_cycle();
    auto w = occupancy_of_policy(walk, StationaryPolicy::uniform(3, 2), 1e-13);
    Vector want = oracle::occupancy_direct(walk, Matrix::Constant(3, 2, 0.5));
    CHECK((w.mass() - want).lpNorm<Eigen::Infinity>() < 1e-10);
    CHECK(w(2, 1) == doctest::Approx(1.0 / 6).epsilon(1e-10));
}

TEST_CASE("policy from occupancy") {
    auto flip = flip_model();
    Vector point = Vector::Zero(4);
    point[0] = 1.0;
    auto pi = policy_from_occupancy(flip, point);
    CHECK(pi(0, 0) == 1.0);
    CHECK(pi(0, 1) == 0.0);
    CHECK(pi(1, 0) == 0.5);
    CHECK(pi(1, 1) == 0.5);
    auto u = policy_from_occupancy(flip, Vector::Constant(4, 0.25));
    CHECK(u.matrix().isApprox(Matrix::Constant(2, 2, 0.5)));
}

TEST_CASE("round trip occupancy -> policy -> occupancy") {
    Rng rng(5);
    for (int k = 0; k < 20; ++k) {
        auto m = random_ergodic_model(4, 3, 500 + k);
        auto mu = occupancy_of_policy(m, random_policy(4, 3, rng), 1e-13);
        auto back = occupancy_of_policy(m, policy_from_occupancy(m, mu), 1e-13);
        CHECK((back.mass() - mu.mass()).lpNorm<Eigen::Infinity>() < 1e-8);
    }
}

TEST_CASE("mixing coefficient") {
    auto flip = flip_model();
    auto est = mixing_coefficient(flip);
    CHECK(est.contraction == 1.0);
    CHECK(std::isinf(est.tau));
    CHECK(est.assumption_violated);

    Matrix uniform_rows = Matrix::Constant(6, 3, 1.0 / 3);
    auto flat = mixing_coefficient(MdpModel::checked(3, 2, uniform_rows, Vector::Constant(3, 1.0 / 3)));
    CHECK(flat.contraction == doctest::Approx(0.0));
    CHECK(flat.tau == 0.0);

    const double gap = std::exp(-1.0);
    Matrix rows(2, 2);
    rows << 0.5 + gap / 2, 0.5 - gap / 2, 0.5 - gap / 2, 0.5 + gap / 2;
    auto one = mixing_coefficient(MdpModel::checked(2, 1, rows, Vector::Constant(2, 0.5)));
    CHECK(std::abs(one.tau - 1.0) < 1e-6);
    CHECK(dobrushin_coefficient(rows) == doctest::Approx(gap).epsilon(1e-12));
}

TEST_CASE("exact mixing equals enumeration over deterministic policies") {
    for (int k = 0; k < 10; ++k) {
        auto m = random_ergodic_model(4, 3, 900 + k, 0.02, 0.5);
        double best = 0.0;
        oracle::for_each_deterministic(4, 3, [&](const Matrix& pi) {
            best = std::max(best, dobrushin_coefficient(oracle::chain_of(m, pi)));
        });
        CHECK(mixing_coefficient(m).contraction == doctest::Approx(best).epsilon(1e-14));
        CHECK(mixing_coefficient(m, SampledMixing{200, 3}).contraction <= best + 1e-15);
    }
}

TEST_CASE("contraction property for random distribution pairs") {
    Rng rng(17);
    auto m = random_ergodic_model(5, 2, 77);
    double kappa = mixing_coefficient(m).contraction;
    for (int k = 0; k < 100; ++k) {
        auto pi = random_policy(5, 2, rng);
        Matrix chain = policy_transition_matrix(m, pi);
        Eigen::RowVectorXd a = random_distribution(5, rng).transpose();
        Eigen::RowVectorXd b = random_distribution(5, rng).transpose();
        CHECK((a * chain - b * chain).lpNorm<1>() <= kappa * (a - b).lpNorm<1>() + 1e-12);
    }
}

TEST_CASE("stationary l1 distance is dominated by occupancy l1 distance") {
    Rng rng(23);
    for (int k = 0; k < 100; ++k) {
        auto m = random_ergodic_model(4, 2, 3000 + k % 10);
        auto p1 = random_policy(4, 2, rng), p2 = random_policy(4, 2, rng);
        Vector n1 = stationary_distribution(m, p1, 1e-13), n2 = stationary_distribution(m, p2, 1e-13);
        auto m1 = occupancy_of_policy(m, p1, 1e-13), m2 = occupancy_of_policy(m, p2, 1e-13);
        CHECK((n1 - n2).lpNorm<1>() <= (m1.mass() - m2.mass()).lpNorm<1>() + 1e-9);
    }
}

TEST_CASE("long run average reward") {
    auto flip = flip_model();
    Vector mu = Vector::Constant(4, 0.25);
    CHECK(long_run_average_reward(mu, Vector::Ones(4)) == doctest::Approx(1.0));
    CHECK(long_run_average_reward(mu, Vector::Zero(4)) == 0.0);
    Vector ind = Vector::Zero(4);
    ind[0] = 1.0;
    CHECK(long_run_average_reward(mu, ind) == doctest::Approx(0.25));
    CHECK_THROWS_AS(long_run_average_reward(mu, Vector::Constant(4, 1.5)), std::invalid_argument);
}

TEST_CASE("random ergodic generator respects the floor") {
    auto m = random_ergodic_model(6, 3, 1, 0.05);
    CHECK(validate_model(m).ok());
    CHECK(m.transition().minCoeff() > 0.0);
    CHECK(mixing_coefficient(m).contraction < 1.0);
}

TEST_CASE("sample_index follows weights") {
    Rng rng(3);
    double w[3] = {0.2, 0.0, 0.8};
    int counts[3] = {0, 0, 0};
    const int n = 100000;
    for (int i = 0; i < n; ++i) ++counts[sample_index(w, 3, rng)];
    CHECK(counts[1] == 0);
    double sd = std::sqrt(n * 0.2 * 0.8);
    CHECK(std::abs(counts[0] - 0.2 * n) < 3 * sd);
    double zero[2] = {0.0, 0.0};
    int c0 = 0;
    for (int i = 0; i < 1000; ++i) c0 += sample_index(zero, 2, rng) == 0;
    CHECK(c0 > 400);
    CHECK(c0 < 600);
}
