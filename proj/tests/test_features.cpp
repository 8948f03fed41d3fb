#include "omdp/features.hpp"
#include "omdp/polytope.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>

using namespace omdp;

namespace {

std::shared_ptr<const FeatureMap> identity_phi(int n, double w = 1.0) {
    return std::make_shared<const FeatureMap>(FeatureMap::identity(n, w));
}

Vector random_simplex(int n, Rng& rng, double floor = 0.0) {
    std::exponential_distribution<double> e(1.0);
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = e(rng);
    v /= v.sum();
    return floor + (1.0 - n * floor) * v.array();
}

// Independently coded c(theta) for Phi = identity.
double identity_objective(const Vector& th, const MdpModel& m, const Vector& cum, double w, double delta,
                          double h) {
    double v = cum.dot(th);
    for (int i = 0; i < th.size(); ++i) {
        double x = th[i];
        v -= w * (x >= delta ? (x > 0 ? x * std::log(x) : 0.0)
                             : delta * std::log(delta) + (1 + std::log(delta)) * (x - delta));
        v -= h * std::max(delta - x, 0.0);
    }
    const int S = m.num_states(), A = m.num_actions();
    for (int s2 = 0; s2 < S; ++s2) {
        double f = 0.0;
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) f += th[s * A + a] * (m.prob(s, a, s2) - (s == s2 ? 1.0 : 0.0));
        v -= h * std::abs(f);
    }
    return v;
}

// Exact projection onto {x >= 0, sum x <= W, a'x = 1} by active-set enumeration.
Vector projection_oracle(const Vector& raw, const Vector& a, double w) {
    const int d = static_cast<int>(raw.size());
    Vector best;
    double best_dist = INFINITY;
    for (int mask = 1; mask < (1 << d); ++mask) {
        for (int l1_active = 0; l1_active < 2; ++l1_active) {
            std::vector<int> idx;
            for (int j = 0; j < d; ++j)
                if (mask >> j & 1) idx.push_back(j);
            const int k = static_cast<int>(idx.size());
            const int m = 1 + l1_active;
            Matrix kkt = Matrix::Zero(k + m, k + m);
            Vector rhs = Vector::Zero(k + m);
            for (int i = 0; i < k; ++i) {
                kkt(i, i) = 1.0;
                kkt(i, k) = kkt(k, i) = a[idx[i]];
                if (l1_active) kkt(i, k + 1) = kkt(k + 1, i) = 1.0;
                rhs[i] = raw[idx[i]];
            }
            rhs[k] = 1.0;
            if (l1_active) rhs[k + 1] = w;
            Vector sol = kkt.fullPivLu().solve(rhs);
            if ((kkt * sol - rhs).norm() > 1e-9) continue;
            Vector x = Vector::Zero(d);
            for (int i = 0; i < k; ++i) x[idx[i]] = sol[i];
            if (x.minCoeff() < -1e-12 || x.sum() > w + 1e-12 || std::abs(a.dot(x) - 1) > 1e-9) continue;
            double dist = (x - raw).norm();
            if (dist < best_dist) {
                best_dist = dist;
                best = x;
            }
        }
    }
    return best;
}

}  // namespace

TEST_CASE("feature map construction and access") {
    std::vector<FeatureMap::Column> cols = {{{0, 0.5}, {3, 0.5}}, {{1, 1.0}}};
    FeatureMap phi(4, cols, 2.0);
    CHECK(phi.dim() == 2);
    CHECK(phi.column_mass().isApprox(Vector::Ones(2)));
    CHECK(phi.row_norms()[3] == 0.5);
    CHECK(phi.row_norms()[2] == 0.0);
    Vector th(2);
    th << 0.4, 0.6;
    CHECK(phi.row_dot(3, th) == doctest::Approx(0.2));
    CHECK(phi.apply(th)[1] == doctest::Approx(0.6));
    CHECK_THROWS_AS(FeatureMap(4, {{{0, 0.5}}}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(FeatureMap(4, {{{4, 1.0}}}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(FeatureMap(4, {{{0, 1.5}, {1, -0.5}}}, 1.0), std::invalid_argument);
    auto r = FeatureMap::random_sparse(50, 6, 5, 1.0, 3);
    CHECK((r.column_mass().array() - 1.0).abs().maxCoeff() < 1e-12);
    CHECK(r.matrix().nonZeros() == 30);
}

TEST_CASE("smoothed entropy") {
    const double d = 0.05;
    CHECK(smoothed_entropy(d, d) == doctest::Approx(d * std::log(d)));
    CHECK(smoothed_entropy(d - 1e-13, d) == doctest::Approx(d * std::log(d)));
    CHECK(smoothed_entropy(0.0, std::exp(-1.0)) == doctest::Approx(-std::exp(-1.0)));
    CHECK(smoothed_entropy(1.0, 0.3) == 0.0);
    CHECK(smoothed_entropy(0.4, 0.05) == doctest::Approx(0.4 * std::log(0.4)));
    CHECK(smoothed_entropy_derivative(0.0, d) == doctest::Approx(1 + std::log(d)));
    Rng rng(1);
    std::uniform_real_distribution<double> u(-0.5, 1.0);
    for (int k = 0; k < 1000; ++k) {
        double x = u(rng), y = u(rng);
        double mid = smoothed_entropy(0.5 * (x + y), d);
        CHECK(mid <= 0.5 * (smoothed_entropy(x, d) + smoothed_entropy(y, d)) + 1e-15);
        double h = 1e-6;
        double fd = (smoothed_entropy(x + h, d) - smoothed_entropy(x - h, d)) / (2 * h);
        if (std::abs(x - d) > 2 * h) CHECK(fd == doctest::Approx(smoothed_entropy_derivative(x, d)).epsilon(1e-6));
    }
}

TEST_CASE("shortfall penalty") {
    CHECK(shortfall_penalty(Vector::Constant(3, 0.2), 0.1) == 0.0);
    CHECK(shortfall_penalty(Vector::Zero(5), 0.1) == doctest::Approx(0.5));
    Vector v = Vector::Constant(3, 0.3);
    v[1] = 0.05;
    CHECK(shortfall_penalty(v, 0.1) == doctest::Approx(0.05));
}

TEST_CASE("penalized objective") {
    auto flip = flip_model();
    FeatureModel fm(flip, identity_phi(4));
    Vector cum(4);
    cum << 3, -1, 2, 0.5;
    Vector th = Vector::Constant(4, 0.25);
    auto p = PenaltyParams::round(6, 2.0, 0.1, 50.0, cum);
    CHECK(penalized_objective(th, fm, p) == doctest::Approx(cum.dot(th) + 3.0 * std::log(4.0)));
    CHECK(fm.flow_residual(th) == doctest::Approx(0.0));

    Rng rng(3);
    for (int k = 0; k < 50; ++k) {
        Vector x = random_simplex(4, rng);
        CHECK(penalized_objective(x, fm, p) == doctest::Approx(identity_objective(x, flip, cum, 3.0, 0.1, 50.0)));
    }
    PenaltyParams zero;
    zero.entropy_weight = 1.5;
    zero.delta = 0.1;
    Vector x = random_simplex(4, rng);
    CHECK(penalized_objective(x, fm, zero) == doctest::Approx(-1.5 * smoothed_entropy(x, 0.1)));

    // On a feasible point the penalty vanishes and c equals the exact RFTL objective.
    auto m = random_ergodic_model(3, 2, 5);
    FeatureModel fm2(m, identity_phi(6));
    ShrunkPolytope poly(m, 0.01);
    Vector c6 = 10 * oracle::random_rewards(6, rng);
    auto step = solve_rftl_step(poly, c6, 10, 2.0);
    auto p2 = PenaltyParams::round(10, 2.0, 0.01, 1e3, c6);
    CHECK(penalized_objective(step.mu, fm2, p2) ==
          doctest::Approx(c6.dot(step.mu) - 5.0 * negative_entropy(step.mu)).epsilon(1e-6));
}

TEST_CASE("exact gradient matches finite differences") {
    Rng rng(7);
    auto m = random_ergodic_model(4, 2, 12);
    auto sparse = std::make_shared<const FeatureMap>(FeatureMap::random_sparse(8, 5, 3, 2.0, 4));
    for (auto phi : {identity_phi(8), sparse}) {
        FeatureModel fm(m, phi);
        const int d = phi->dim();
        Vector cum = 7 * oracle::random_rewards(d, rng);
        auto p = PenaltyParams::round(7, 1.3, 0.02, 3.0, cum);
        int checked = 0;
        for (int k = 0; k < 100; ++k) {
            Vector th = random_simplex(d, rng);
            Vector x = phi->apply(th);
            Vector flow = fm.flow_features() * th;
            const double h = 1e-7;
            if ((x.array() - p.delta).abs().minCoeff() < 10 * h || flow.cwiseAbs().minCoeff() < 10 * h) continue;
            ++checked;
            Vector g = exact_gradient(th, fm, p);
            for (int j = 0; j < d; ++j) {
                Vector e = Vector::Zero(d);
                e[j] = h;
                double fd = (penalized_objective(th + e, fm, p) - penalized_objective(th - e, fm, p)) / (2 * h);
                CHECK(std::abs(fd - g[j]) <= 1e-5 * std::max(1.0, std::abs(g[j])));
            }
        }
        CHECK(checked > 50);
    }

    auto flip = flip_model();
    FeatureModel fm(flip, identity_phi(4));
    PenaltyParams ent;
    ent.entropy_weight = 3.0;
    ent.delta = 0.01;
    Vector th(4);
    th << 0.1, 0.2, 0.3, 0.4;
    Vector g = exact_gradient(th, fm, ent);
    for (int j = 0; j < 4; ++j) CHECK(g[j] == doctest::Approx(-3.0 * (1 + std::log(th[j]))));

    Vector feas = Vector::Constant(4, 0.25);
    Vector cum = Vector::Ones(4);
    auto p = PenaltyParams::round(2, 1.0, 0.1, 100.0, cum);
    auto p0 = PenaltyParams::round(2, 1.0, 0.1, 0.0, cum);
    CHECK(exact_gradient(feas, fm, p).isApprox(exact_gradient(feas, fm, p0)));
}

TEST_CASE("sampling constants") {
    auto flip = flip_model();
    FeatureModel fm(flip, identity_phi(4));
    auto [c1, c2] = sampling_constants(fm, Vector::Constant(4, 0.25), Vector::Constant(2, 0.5));
    CHECK(c1 == doctest::Approx(4.0));
    double direct = 0.0;
    for (int s2 = 0; s2 < 2; ++s2) {
        double n = 0.0;
        for (int i = 0; i < 4; ++i) {
            int s = i / 2, a = i % 2;
            double v = flip.prob(s, a, s2) - (s == s2 ? 1.0 : 0.0);
            n += v * v;
        }
        direct = std::max(direct, 2 * std::sqrt(n));
    }
    CHECK(c2 == doctest::Approx(direct));

    auto m = random_ergodic_model(5, 2, 1);
    auto phi = std::make_shared<const FeatureMap>(FeatureMap::random_sparse(10, 4, 3, 1.0, 2));
    FeatureModel fm2(m, phi);
    Sampler best(fm2);
    CHECK(best.c1() == doctest::Approx(phi->row_norms().sum()));
    Vector q1 = Vector::Constant(10, 0.1);
    CHECK_THROWS_AS(Sampler(fm2, Vector::Zero(10), Vector::Constant(5, 0.2)), std::invalid_argument);
    CHECK(Sampler(fm2, q1, Vector::Constant(5, 0.2)).c1() >= best.c1() - 1e-12);
}

TEST_CASE("stochastic gradient is unbiased by exhaustive expectation") {
    auto flip = flip_model();
    FeatureModel fm(flip, identity_phi(4));
    Sampler sampler(fm, Vector::Constant(4, 0.25), Vector::Constant(2, 0.5));
    Rng rng(11);
    struct Setting { int t; double eta, h, delta; };
    for (Setting st : {Setting{1, 1.0, 0.0, 0.1}, Setting{5, 2.0, 10.0, 0.2}, Setting{50, 7.0, 1e3, 1e-3},
                       Setting{3, 0.5, 1.0, 0.3}, Setting{100, 10.0, 1e4, 1e-8}}) {
        for (int k = 0; k < 20; ++k) {
            Vector th = random_simplex(4, rng);
            if (k == 0) th = Vector::Constant(4, 0.25);
            Vector cum = st.t * oracle::random_rewards(4, rng);
            auto p = PenaltyParams::round(st.t, st.eta, st.delta, st.h, cum);
            Vector mean = Vector::Zero(4);
            for (int i = 0; i < 4; ++i)
                for (int s = 0; s < 2; ++s)
                    mean += sampler.q1()[i] * sampler.q2()[s] * stochastic_gradient_at(th, fm, p, sampler, i, s);
            Vector g = exact_gradient(th, fm, p);
            CHECK((mean - g).lpNorm<Eigen::Infinity>() <= 1e-12 * std::max(1.0, g.lpNorm<Eigen::Infinity>()));
        }
    }
}

TEST_CASE("stochastic gradient norm bound") {
    auto m = random_ergodic_model(6, 2, 3);
    auto phi = std::make_shared<const FeatureMap>(FeatureMap::random_sparse(12, 5, 4, 1.0, 9));
    FeatureModel fm(m, phi);
    Sampler sampler(fm);
    Rng rng(5);
    PenaltyParams none;
    Vector cum = 9 * oracle::random_rewards(5, rng);
    none.cum_feature = &cum;
    none.reward_rounds = 9;
    Vector th = random_simplex(5, rng);
    CHECK(stochastic_gradient(th, fm, none, sampler, rng).isApprox(cum));
    for (int k = 0; k < 10000; ++k) {
        int t = 1 + k % 40;
        Vector c = phi->transpose_apply(double(t) * oracle::random_rewards(12, rng));
        auto p = PenaltyParams::round(t, 2.5, 1e-4, 30.0 * t, c);
        Vector x = random_simplex(5, rng);
        Vector g = stochastic_gradient(x, fm, p, sampler, rng);
        CHECK(g.norm() <= gradient_norm_bound(fm, p, sampler));
    }
}

TEST_CASE("projection onto feature weights") {
    Vector a = Vector::Ones(2);
    Vector v(2);
    v << 0.8, 0.8;
    CHECK(project_theta(v, a, 1.0).isApprox(Vector::Constant(2, 0.5)));
    v << 2, 0;
    Vector p = project_theta(v, a, 1.0);
    CHECK(p[0] == doctest::Approx(1.0));
    CHECK(p[1] == doctest::Approx(0.0));
    // Grid minimizer at 1e-3 resolution.
    Rng rng(2);
    std::uniform_real_distribution<double> u(-1.0, 2.0);
    for (int k = 0; k < 20; ++k) {
        Vector r(2);
        r << u(rng), u(rng);
        double best = INFINITY, bx = 0;
        for (int i = 0; i <= 1000; ++i) {
            Vector g(2);
            g << i / 1000.0, 1 - i / 1000.0;
            if ((g - r).norm() < best) {
                best = (g - r).norm();
                bx = g[0];
            }
        }
        CHECK(std::abs(project_theta(r, a, 1.0)[0] - bx) <= 1e-3);
    }
    CHECK_THROWS_AS(project_theta(v, a, 0.5), std::invalid_argument);

    // General column masses against active-set enumeration.
    std::uniform_real_distribution<double> am(0.3, 1.5);
    for (int k = 0; k < 200; ++k) {
        const int d = 2 + k % 4;
        Vector mass(d), raw(d);
        for (int j = 0; j < d; ++j) {
            mass[j] = am(rng);
            raw[j] = u(rng);
        }
        const double w = (k % 3 == 0) ? 1.0 / mass.maxCoeff() + 0.2 : 3.0;
        Vector got = project_theta(raw, mass, w);
        Vector want = projection_oracle(raw, mass, w);
        CHECK((got - want).lpNorm<Eigen::Infinity>() < 1e-8);
        CHECK(got.minCoeff() >= 0.0);
        CHECK(got.sum() <= w + 1e-9);
        CHECK(mass.dot(got) == doctest::Approx(1.0).epsilon(1e-10));
    }

    for (int k = 0; k < 200; ++k) {
        const int d = 6;
        Vector x(d), y(d);
        for (int j = 0; j < d; ++j) {
            x[j] = u(rng);
            y[j] = u(rng);
        }
        Vector ones = Vector::Ones(d);
        Vector px = project_theta(x, ones, 1.0), py = project_theta(y, ones, 1.0);
        CHECK((project_theta(px, ones, 1.0) - px).norm() < 1e-14);
        CHECK((px - py).norm() <= (x - y).norm() + 1e-14);
    }
}

TEST_CASE("psga") {
    Vector c(3);
    c << 0.2, 0.5, 0.3;
    Vector ones = Vector::Ones(3);
    auto proj = [&](const Vector& x) { return project_theta(x, ones, 1.0); };
    auto grad = [&](const Vector& x) { return Vector(-2.0 * (x - c)); };
    const long long K = 10000;
    auto res = psga(grad, proj, 1.0 / std::sqrt(double(K)), K, Vector::Constant(3, 1.0 / 3));
    CHECK((res.average - c).squaredNorm() <= 1e-3);

    Vector start(3);
    start << 1, 0, 0;
    auto one = psga(grad, proj, 0.1, 1, start);
    CHECK(one.average.isApprox(proj(Vector(start + 0.1 * grad(start)))));
    CHECK(one.iterations == 1);
    CHECK_THROWS_AS(psga(grad, proj, 0.1, 0, start), std::invalid_argument);
}

TEST_CASE("psga gap shrinks with K and stays below the high-probability bound") {
    // Phi = identity, H = 0: the maximizer over the simplex is a softmax.
    auto m = random_ergodic_model(3, 2, 44);
    FeatureModel fm(m, identity_phi(6));
    Sampler sampler(fm);
    Rng rng(8);
    Vector cum = 20 * oracle::random_rewards(6, rng);
    const double eta = 2.0;
    auto p = PenaltyParams::round(20, eta, 1e-3, 0.0, cum);
    Vector best = (cum.array() / p.entropy_weight).exp();
    best /= best.sum();
    REQUIRE(best.minCoeff() > p.delta);
    const double opt = penalized_objective(best, fm, p);
    const double gbound = gradient_norm_bound(fm, p, sampler);
    Vector ones = Vector::Ones(6);
    auto proj = [&](const Vector& x) { return project_theta(x, ones, 1.0); };

    auto gap_at = [&](long long K, std::uint64_t seed) {
        Rng r(seed);
        auto grad = [&](const Vector& x) { return stochastic_gradient(x, fm, p, sampler, r); };
        auto res = psga(grad, proj, 1.0 / (std::sqrt(double(K)) * gbound), K, Vector::Constant(6, 1.0 / 6));
        return opt - penalized_objective(res.average, fm, p);
    };
    double g1 = 0, g4 = 0;
    int within = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        double gap = gap_at(2000, seed);
        if (seed < 20) {
            g1 += gap;
            g4 += gap_at(8000, seed + 1000);
        }
        within += gap <= psga_gap_bound(1.0, gbound, 2000, 6, 0.05);
    }
    CHECK(g1 / g4 >= 1.5);
    CHECK(within >= 95);
}
