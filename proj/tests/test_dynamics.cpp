#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "jm/dynamics.hpp"

using namespace jm;

namespace {

// Regression map close to the realized degree-4 mating (exact values are not
// needed here, only a generic degree-4 rational map).
RationalMap sample_degree4() {
    const Complex p(0.459415, 3.525093), q(-0.754674, -6.175815), r(0.667388, 4.176966);
    return RationalMap({0, 0, 0, p, 1}, {r, q});
}

// Independent evaluation straight from the coefficient lists, no chart swap.
Complex direct_eval(const RationalMap& m, Complex z) {
    Complex n(0), d(0), zk(1);
    for (const auto& c : m.num()) { n += c * zk; zk *= z; }
    zk = 1;
    for (const auto& c : m.den()) { d += c * zk; zk *= z; }
    return n / d;
}

Complex random_point(std::mt19937& rng, double radius) {
    std::uniform_real_distribution<double> u(-radius, radius);
    return {u(rng), u(rng)};
}

}  // namespace

TEST_CASE("eval: direct arithmetic") {
    const auto sq = RationalMap::polynomial({0, 0, 1});
    const auto w = sq(Complex(1, 1));
    CHECK(std::abs(w.value() - Complex(0, 2)) < 1e-15);

    const auto f = RationalMap::polynomial({0, 0, 1, -2.0 / 9.0});
    CHECK(f(Complex(0)).value() == Complex(0));
    CHECK(f(SpherePoint::infinity()).is_infinity());
}

TEST_CASE("eval: chart at infinity agrees with direct evaluation") {
    const auto m = sample_degree4();
    std::mt19937 rng(11);
    for (int k = 0; k < 200; ++k) {
        const Complex z = random_point(rng, 6.0);
        const Complex a = m(z).value();
        const Complex b = direct_eval(m, z);
        CHECK(std::abs(a - b) <= 1e-11 * std::max(1.0, std::abs(b)));
    }
    // Value at infinity: deg num - deg den = 3 > 0.
    CHECK(m(SpherePoint::infinity()).is_infinity());
    // Pole of the denominator.
    const Complex pole = -m.den()[0] / m.den()[1];
    CHECK(chordal_distance(m(pole), SpherePoint::infinity()) < 1e-8);
}

TEST_CASE("inverted and recentered conjugates") {
    const auto m = sample_degree4();
    const auto inv = m.inverted();
    const auto sh = m.recentered(Complex(0.3, -0.2));
    std::mt19937 rng(3);
    for (int k = 0; k < 50; ++k) {
        const Complex z = random_point(rng, 2.0);
        const Complex a = 1.0 / m(1.0 / z).value();
        CHECK(std::abs(inv(z).value() - a) <= 1e-10 * std::max(1.0, std::abs(a)));
        const Complex b = m(z + Complex(0.3, -0.2)).value() - Complex(0.3, -0.2);
        CHECK(std::abs(sh(z).value() - b) <= 1e-10 * std::max(1.0, std::abs(b)));
    }
}

TEST_CASE("polynomial_roots recovers planted roots") {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 2 + trial % 7;
        std::vector<Complex> planted;
        CoeffList p{1};
        for (int k = 0; k < n; ++k) {
            planted.push_back(random_point(rng, 3.0));
            p = poly::mul(p, CoeffList{-planted.back(), 1});
        }
        const auto roots = polynomial_roots(p);
        int total = 0;
        for (const auto& r : roots) total += r.multiplicity;
        CHECK(total == n);
        for (const auto& z : planted) {
            double best = 1e300;
            for (const auto& r : roots) best = std::min(best, std::abs(r.z - z));
            CHECK(best < 1e-9);
        }
    }
}

TEST_CASE("polynomial_roots clusters a double root") {
    // (z - 1)^2 (z + 2)
    const CoeffList p = poly::mul(poly::mul(CoeffList{-1, 1}, CoeffList{-1, 1}), CoeffList{2, 1});
    const auto roots = polynomial_roots(p);
    REQUIRE(roots.size() == 2);
    const auto dbl = std::find_if(roots.begin(), roots.end(), [](const Root& r) { return r.multiplicity == 2; });
    REQUIRE(dbl != roots.end());
    CHECK(std::abs(dbl->z - Complex(1)) < 1e-7);
    CHECK(dbl->ill_conditioned);
}

TEST_CASE("critical_points of the cubic family") {
    const Complex a(0.3, -0.7);
    const auto f = RationalMap::polynomial({0, 0, 1, a});
    const auto cps = critical_points(f);
    REQUIRE(cps.size() == 3);
    int budget = 0;
    bool saw0 = false, sawc = false, sawinf = false;
    for (const auto& cp : cps) {
        budget += cp.local_degree - 1;
        if (cp.point.is_infinity()) {
            sawinf = true;
            CHECK(cp.local_degree == 3);
        } else if (std::abs(cp.point.value()) < 1e-12) {
            saw0 = true;
            CHECK(cp.local_degree == 2);
        } else {
            sawc = std::abs(cp.point.value() - (-2.0 / (3.0 * a))) < 1e-12;
            CHECK(cp.local_degree == 2);
        }
    }
    CHECK(saw0);
    CHECK(sawc);
    CHECK(sawinf);
    CHECK(budget == 4);
}

TEST_CASE("critical_points of power maps") {
    for (int d = 2; d <= 6; ++d) {
        CoeffList c(static_cast<std::size_t>(d + 1), 0);
        c.back() = 1;
        const auto cps = critical_points(RationalMap::polynomial(c));
        REQUIRE(cps.size() == 2);
        for (const auto& cp : cps) CHECK(cp.local_degree == d);
    }
}

TEST_CASE("critical multiplicity budget is 2D-2") {
    std::mt19937 rng(17);
    for (int trial = 0; trial < 40; ++trial) {
        const int dn = 1 + trial % 5;
        const int dd = trial % 4;
        CoeffList n, d;
        for (int k = 0; k <= dn; ++k) n.push_back(random_point(rng, 1.0));
        for (int k = 0; k <= dd; ++k) d.push_back(random_point(rng, 1.0));
        const RationalMap m(n, d);
        if (m.degree() < 2) continue;
        int budget = 0;
        for (const auto& cp : critical_points(m)) budget += cp.local_degree - 1;
        CHECK(budget == 2 * m.degree() - 2);
    }
    int budget = 0;
    for (const auto& cp : critical_points(sample_degree4())) budget += cp.local_degree - 1;
    CHECK(budget == 6);
}

TEST_CASE("preimages: square roots and the critical value") {
    const auto sq = RationalMap::polynomial({0, 0, 1});
    auto pre = preimages(sq, Complex(4));
    REQUIRE(pre.size() == 2);
    std::sort(pre.begin(), pre.end(), [](auto& a, auto& b) { return a.value().real() < b.value().real(); });
    CHECK(std::abs(pre[0].value() + 2.0) < 1e-14);
    CHECK(std::abs(pre[1].value() - 2.0) < 1e-14);

    const auto zero = preimages(sq, Complex(0));
    REQUIRE(zero.size() == 2);
    CHECK(std::abs(zero[0].value()) < 1e-7);
    CHECK(std::abs(zero[1].value()) < 1e-7);

    const auto inf = preimages(sq, SpherePoint::infinity());
    REQUIRE(inf.size() == 2);
    CHECK(inf[0].is_infinity());
}

TEST_CASE("eval of preimages returns the target (property)") {
    std::mt19937 rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        const int dn = 2 + trial % 4;
        const int dd = trial % 3;
        CoeffList n, d;
        for (int k = 0; k <= dn; ++k) n.push_back(random_point(rng, 1.0));
        for (int k = 0; k <= dd; ++k) d.push_back(random_point(rng, 1.0));
        const RationalMap m(n, d);
        const Complex w = random_point(rng, 2.0);
        const auto pre = preimages(m, w);
        CHECK(static_cast<int>(pre.size()) == m.degree());
        for (const auto& z : pre) {
            REQUIRE(z.is_finite());
            CHECK(std::abs(m(z).value() - w) < 1e-9 * std::max(1.0, std::abs(w)));
        }
    }
    const auto m = sample_degree4();
    for (int k = 0; k < 20; ++k) {
        const Complex w = random_point(rng, 3.0);
        const auto pre = preimages(m, w);
        CHECK(pre.size() == 4);
        for (const auto& z : pre) CHECK(std::abs(m(z).value() - w) < 1e-9);
    }
}

TEST_CASE("newton_solve: sqrt(2)") {
    const auto res = newton_solve([](const RealVector& x) { return RealVector::Constant(1, x(0) * x(0) - 2.0); },
                                  RealVector::Constant(1, 1.0), {.tol = 1e-14});
    REQUIRE(res.converged());
    CHECK(std::abs(res.x(0) - std::sqrt(2.0)) < 1e-12);
}

TEST_CASE("newton_solve: critical fixed point of z^2 + a z^3") {
    // f_a(c_a) = c_a with c_a = -2/(3a) has the closed form a = -2/9.
    auto residual = [](const RealVector& v) {
        const Complex a = unpack(v)[0];
        const Complex c = -2.0 / (3.0 * a);
        const Complex r = c * c + a * c * c * c - c;
        return pack(std::vector<Complex>{r});
    };
    const auto res = newton_solve(residual, pack(std::vector<Complex>{Complex(-0.3, 0)}));
    REQUIRE(res.converged());
    CHECK(std::abs(unpack(res.x)[0] - Complex(-2.0 / 9.0)) < 1e-12);
}

TEST_CASE("newton_solve: f^2(c) = f(c) from a seed grid") {
    // Closed form in u = 1/a: 16u^3 + 108u^2 - 729 = (2u + 9)^2 (4u - 9),
    // so the only root with f(c) != c is a = 4/9.
    auto residual = [](const RealVector& v) {
        const Complex a = unpack(v)[0];
        const Complex c = -2.0 / (3.0 * a);
        auto f = [&](Complex z) { return z * z + a * z * z * z; };
        return pack(std::vector<Complex>{f(f(c)) - f(c)});
    };
    bool found = false;
    for (double x = -3; x <= 3; x += 0.5)
        for (double y = -3; y <= 3; y += 0.5) {
            if (std::hypot(x, y) < 1e-9) continue;
            const auto res = newton_solve(residual, pack(std::vector<Complex>{Complex(x, y)}));
            if (!res.converged()) continue;
            const Complex a = unpack(res.x)[0];
            const Complex c = -2.0 / (3.0 * a);
            const Complex fc = c * c + a * c * c * c;
            if (std::abs(fc - c) < 1e-6 || std::abs(fc) < 1e-6) continue;
            CHECK(std::abs(a - Complex(4.0 / 9.0)) < 1e-12);
            CHECK(res.residual_norm < 1e-12);
            found = true;
        }
    CHECK(found);
}

TEST_CASE("newton_solve: reports non-convergence and singularity") {
    const auto none = newton_solve([](const RealVector& x) { return RealVector::Constant(1, x(0) * x(0) + 1.0); },
                                   RealVector::Constant(1, 0.5), {.max_iter = 30});
    CHECK_FALSE(none.converged());
    CHECK(none.residual_norm >= 1.0);

    const auto sing = newton_solve(
        [](const RealVector& x) {
            RealVector r(2);
            r << x(0) + x(1) - 1.0, 2.0 * (x(0) + x(1)) - 3.0;
            return r;
        },
        RealVector::Zero(2));
    CHECK(sing.status == NewtonStatus::SingularJacobian);
}
