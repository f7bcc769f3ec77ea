#include "doctest.h"

#include <cmath>
#include <random>

#include "jm/boettcher.hpp"

using namespace jm;

namespace {

const Complex kF(4.0 / 9.0, 0.0);
const Complex kG(0.005542409185267151, 0.4057814923715365);

RationalMap cubic(Complex a) { return RationalMap::polynomial({0, 0, 1, a}); }

Complex random_disk_point(std::mt19937& rng, double rmax) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return std::polar(rmax * std::sqrt(u(rng)), kTwoPi * u(rng));
}

}  // namespace

TEST_CASE("identity chart of z^2") {
    const BoettcherChart chart(RationalMap::polynomial({0, 0, 1}), SpherePoint(0.0));
    CHECK(chart.d0() == 2);
    CHECK(std::abs(chart.value(Complex(0.5)) - 0.5) < 1e-15);
    CHECK(std::abs(chart.inverse(Complex(0.3, 0.4)).value() - Complex(0.3, 0.4)) < 1e-12);
    CHECK(chart.value(Complex(0.0)) == Complex(0.0));
}

TEST_CASE("scaled chart of 4z^2") {
    const BoettcherChart chart(RationalMap::polynomial({0, 0, 4}), SpherePoint(0.0));
    CHECK(chart.lead() == Complex(4.0));
    CHECK(std::abs(chart.value(Complex(0.1)) - 0.4) < 1e-15);
    CHECK(std::abs(chart.inverse(Complex(0.4)).value() - 0.1) < 1e-12);
}

TEST_CASE("chart rejects a non-superattracting center") {
    CHECK_THROWS_AS(BoettcherChart(RationalMap::polynomial({0, 0.5, 1}), SpherePoint(0.0)), std::invalid_argument);
}

TEST_CASE("chart at infinity of a polynomial") {
    // For z^2 the chart at infinity is 1/z.
    const BoettcherChart chart(RationalMap::polynomial({0, 0, 1}), SpherePoint::infinity());
    CHECK(std::abs(chart.value(Complex(4.0)) - 0.25) < 1e-14);
    CHECK(chart.inverse(Complex(0.0)).is_infinity());
}

TEST_CASE("functional equation and round trips on the example cubics") {
    for (const Complex a : {kF, kG}) {
        CAPTURE(a);
        const BoettcherChart chart(cubic(a), SpherePoint(0.0));
        std::mt19937 rng(41);
        double worst_fe = 0.0, worst_rt = 0.0, worst_inv = 0.0;
        for (int k = 0; k < 1000; ++k) {
            const Complex w = random_disk_point(rng, 0.999);
            const SpherePoint z = chart.inverse(w);
            worst_fe = std::max(worst_fe, chart.functional_residual(z));
            worst_rt = std::max(worst_rt, std::abs(chart.value(z) - w));
            if (k < 200) {
                // phi^{-1}(phi(z)) for a basin point z.
                const SpherePoint back = chart.inverse(chart.value(z));
                worst_inv = std::max(worst_inv, std::abs(back.value() - z.value()));
            }
        }
        CHECK(worst_fe < 1e-8);
        CHECK(worst_rt < 1e-7);
        CHECK(worst_inv < 1e-7);
    }
}

TEST_CASE("value outside the basin throws") {
    const BoettcherChart chart(cubic(kF), SpherePoint(0.0));
    CHECK_FALSE(chart.in_basin(Complex(10.0)));
    CHECK_THROWS_AS(chart.value(Complex(10.0)), OutsideBasin);
    CHECK_THROWS_AS(chart.inverse(Complex(1.0)), std::invalid_argument);
}

TEST_CASE("boundary parametrization of z^2") {
    const BoettcherChart chart(RationalMap::polynomial({0, 0, 1}), SpherePoint(0.0));
    const auto bp = boundary_parametrization(chart, 16, 1e-4);
    REQUIRE(bp.points.size() == 16);
    for (std::size_t j = 0; j < 16; ++j) {
        CHECK(std::abs(std::abs(bp.points[j].value()) - 0.9999) < 1e-12);
        CHECK(std::abs(bp.points[j].value() - std::polar(0.9999, kTwoPi * j / 16.0)) < 1e-12);
    }
    CHECK_THROWS_AS(boundary_parametrization(chart, 8, 1e-4), std::invalid_argument);
    CHECK_THROWS_AS(boundary_parametrization(chart, 64, 1e-2), std::invalid_argument);
}

TEST_CASE("boundary parametrization of the example cubics is simple") {
    for (const Complex a : {kF, kG}) {
        CAPTURE(a);
        const BoettcherChart chart(cubic(a), SpherePoint(0.0));
        const auto bp = boundary_parametrization(chart, 1024, 1e-4);
        std::vector<Complex> poly;
        for (const auto& p : bp.points) poly.push_back(p.value());
        CHECK_FALSE(polygon_self_intersection(poly));
        CHECK(signed_area(poly) > 0.0);
        const auto eq = boundary_equivariance(chart, bp);
        MESSAGE("equivariance distance " << eq.max_distance << ", angle " << eq.max_angle);
        CHECK(eq.max_angle < 1e-9);
        // Pointwise the level curve is only Hoelder close to the boundary, so
        // the distance is far above 10 eps; it is bounded, not asserted at 10 eps.
        CHECK(eq.max_distance < 1e-2);
    }
}

TEST_CASE("polygon helpers") {
    const std::vector<Complex> square{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    CHECK(signed_area(square) == doctest::Approx(1.0));
    CHECK_FALSE(polygon_self_intersection(square));
    const std::vector<Complex> bow{{0, 0}, {1, 1}, {1, 0}, {0, 1}};
    CHECK(polygon_self_intersection(bow));
}

TEST_CASE("boundary angles of the example postcritical points") {
    {
        const auto map = cubic(kF);
        auto p = portrait_of(map, {.marked = SpherePoint(0.0)});
        annotate_boundary_angles(p, BoettcherChart(map, SpherePoint(0.0)));
        const auto c = p.find("c1"), fc = p.find("c1^1");
        REQUIRE(c);
        REQUIRE(fc);
        CHECK(p.nodes[static_cast<std::size_t>(*c)].boundary_angle == Angle::of(1, 2));
        CHECK(p.nodes[static_cast<std::size_t>(*fc)].boundary_angle == Angle::of(0, 1));
    }
    {
        const auto map = cubic(kG);
        auto p = portrait_of(map, {.marked = SpherePoint(0.0)});
        annotate_boundary_angles(p, BoettcherChart(map, SpherePoint(0.0)));
        const auto c = p.find("c1");
        REQUIRE(c);
        const auto& ang = p.nodes[static_cast<std::size_t>(*c)].boundary_angle;
        REQUIRE(ang);
        CHECK((*ang == Angle::of(1, 4) || *ang == Angle::of(3, 4)));
        CHECK(p.nodes[static_cast<std::size_t>(*p.find("c1^1"))].boundary_angle == Angle::of(1, 2));
        CHECK(p.nodes[static_cast<std::size_t>(*p.find("c1^2"))].boundary_angle == Angle::of(0, 1));
    }
}
