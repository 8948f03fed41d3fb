#include "omdp/rftl.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace omdp;

TEST_CASE("theorem1 parameters") {
    auto p = theorem1_parameters(100, 1.0, 2, 2);
    CHECK(p.eta == doctest::Approx(std::sqrt(100 * std::log(4.0))).epsilon(1e-14));
    CHECK(p.eta == doctest::Approx(11.7741).epsilon(1e-5));
    CHECK(p.delta == doctest::Approx(std::exp(-10.0)).epsilon(1e-14));
    CHECK(theorem1_parameters(1, 1.0, std::exp(1.0)).eta == doctest::Approx(1.0).epsilon(1e-14));
    auto q = theorem1_parameters(400, 4.0, 2, 2);
    CHECK(q.eta == doctest::Approx(p.eta).epsilon(1e-14));
    CHECK(q.delta == doctest::Approx(p.delta).epsilon(1e-14));
    CHECK_THROWS_AS(theorem1_parameters(10, 0.0, 2, 2), std::invalid_argument);
    CHECK_THROWS_AS(theorem1_parameters(10, INFINITY, 2, 2), std::invalid_argument);
}

TEST_CASE("rftl_init") {
    RftlConfig cfg;
    cfg.horizon = 100;
    cfg.eta = 3.0;
    cfg.delta = 0.1;
    auto st = rftl_init(flip_model(), cfg, 1);
    CHECK(st.t == 1);
    CHECK((st.mu - Vector::Constant(4, 0.25)).lpNorm<Eigen::Infinity>() < 1e-8);

    cfg.delta = 1e-4;
    auto m = random_ergodic_model(4, 3, 17);
    auto rs = rftl_init(m, cfg, 2);
    CHECK(rs.polytope->residual(rs.mu).within(1e-9));

    cfg.delta = 0.3;
    auto clamped = rftl_init(flip_model(), cfg, 3);
    CHECK(clamped.polytope->clamped());
    CHECK(clamped.config.delta == doctest::Approx(0.125).epsilon(1e-9));
}

TEST_CASE("rftl_act") {
    RftlConfig cfg;
    cfg.delta = 0.1;
    auto st = rftl_init(flip_model(), cfg, 5);
    Rng rng(9);
    int ones = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) ones += rftl_act(st, 1, rng);
    CHECK(std::abs(ones - n / 2.0) < 3 * std::sqrt(n * 0.25));

    st.mu = Vector::Zero(4);
    st.mu[1] = 1.0;
    for (int i = 0; i < 100; ++i) CHECK(rftl_act(st, 0, rng) == 1);
    int zeros = 0;
    for (int i = 0; i < 2000; ++i) zeros += rftl_act(st, 1, rng) == 0;
    CHECK(zeros > 850);
    CHECK(zeros < 1150);

    auto m = random_ergodic_model(3, 3, 4);
    cfg.delta = 1e-3;
    auto rs = rftl_init(m, cfg, 6);
    Vector cum = 40.0 * oracle::random_rewards(9, rng);
    rs.mu = solve_rftl_step(*rs.polytope, cum, 40, 2.0).mu;
    int counts[3] = {0, 0, 0};
    for (int i = 0; i < n; ++i) ++counts[rftl_act(rs, 2, rng)];
    double row = rs.mu.segment(6, 3).sum();
    for (int a = 0; a < 3; ++a) {
        double p = rs.mu[6 + a] / row;
        CHECK(std::abs(counts[a] - n * p) <= 3 * std::sqrt(n * p * (1 - p)) + 1);
    }
}

TEST_CASE("rftl_update with zero rewards keeps the max-entropy point") {
    RftlConfig cfg;
    cfg.eta = 5.0;
    cfg.delta = 1e-3;
    auto m = random_ergodic_model(3, 2, 21);
    auto st = rftl_init(m, cfg, 1);
    Vector first = st.mu;
    for (int t = 0; t < 20; ++t) rftl_update(st, Vector::Zero(6));
    CHECK(st.t == 21);
    CHECK((st.mu - first).lpNorm<1>() < 1e-8);
    CHECK_THROWS_AS(rftl_update(st, Vector::Constant(6, 1.5)), std::invalid_argument);
}

TEST_CASE("constant rewards drive the iterate to the LP solution") {
    auto m = random_ergodic_model(3, 2, 34);
    double tau = mixing_coefficient(m).tau;
    const int T = 10000;
    auto th = theorem1_parameters(T, tau, 3, 2);
    RftlConfig cfg;
    cfg.horizon = T;
    cfg.eta = th.eta;
    cfg.delta = th.delta;
    Rng rng(3);
    Vector r = oracle::random_rewards(6, rng);
    auto st = rftl_init(m, cfg, 1);
    for (int t = 1; t < 30; ++t) rftl_update(st, r);
    auto direct = solve_rftl_step(*st.polytope, 29.0 * r, 29, cfg.eta);
    CHECK((st.mu - direct.mu).lpNorm<1>() < 1e-7);

    // Round T depends only on the summed rewards.
    auto last = solve_rftl_step(*st.polytope, double(T) * r, T, cfg.eta);
    double lp = maximize_linear(*st.polytope, r).value;
    CHECK(std::abs(r.dot(last.mu) - lp) <= 0.05);
}

TEST_CASE("iterate closeness, feasibility and be-the-leader on random runs") {
    Rng rng(77);
    for (int k = 0; k < 4; ++k) {
        auto m = random_ergodic_model(3, 2, 400 + k);
        const int T = 200;
        RftlConfig cfg;
        cfg.horizon = T;
        cfg.eta = 4.0;
        cfg.delta = 1e-4;
        auto st = rftl_init(m, cfg, k);
        const double delta = st.polytope->delta();
        const double g = std::max(std::abs(std::log(delta)), 1.0);
        Vector sum = Vector::Zero(6);
        double follow = 0.0;
        for (int t = 1; t <= T; ++t) {
            Vector r = oracle::random_rewards(6, rng);
            Vector prev = st.mu;
            rftl_update(st, r);
            CHECK((prev - st.mu).lpNorm<1>() <= (2 * cfg.eta / t) * (1 + g / cfg.eta) + 1e-9);
            CHECK(st.polytope->residual(st.mu).within(1e-9));
            follow += r.dot(st.mu);
            sum += r;
        }
        double best = maximize_linear(*st.polytope, sum).value;
        CHECK(follow + (T / cfg.eta) * std::log(6.0) >= best - 1e-8 * T);
    }
}
