#include "doctest.h"

#include <cmath>
#include <sstream>

#include "jm/realizer.hpp"
#include "jm/render.hpp"

using namespace jm;

namespace {

RationalMap square() { return RationalMap::polynomial({0, 0, 1}); }

int cycle_at(const std::vector<AttractingCycle>& cycles, const SpherePoint& z) {
    for (std::size_t c = 0; c < cycles.size(); ++c)
        for (const auto& p : cycles[c].points)
            if (chordal_distance(p, z) < 1e-9) return static_cast<int>(c);
    return -2;
}

}  // namespace

TEST_CASE("z^2 has two attracting cycles") {
    const auto cycles = attracting_cycles(square());
    REQUIRE(cycles.size() == 2);
    const int zero = cycle_at(cycles, Complex(0.0));
    const int inf = cycle_at(cycles, SpherePoint::infinity());
    CHECK(zero >= 0);
    CHECK(inf >= 0);
    CHECK(classify_point(square(), Complex(0.5), cycles).label == zero);
    CHECK(classify_point(square(), Complex(2.0), cycles).label == inf);
    CHECK(classify_point(square(), Complex(1.0), cycles).label == kJuliaProxy);
}

TEST_CASE("basilica has an attracting 2-cycle") {
    const auto cycles = attracting_cycles(RationalMap::polynomial({-1, 0, 1}));
    REQUIRE(cycles.size() == 2);
    bool two = false;
    for (const auto& c : cycles) two = two || (c.points.size() == 2 && c.multiplier < 1e-6);
    CHECK(two);
}

TEST_CASE("z^2 basin boundary is the unit circle within a pixel") {
    const Viewport vp{0.0, 4.0, 256, 256};
    const auto cycles = attracting_cycles(square());
    const auto r = render(square(), vp, cycles);
    const int zero = cycle_at(cycles, Complex(0.0));
    double inner = 0.0, outer = 1e9;
    for (int j = 0; j < vp.h; ++j)
        for (int i = 0; i < vp.w; ++i) {
            const double rad = std::abs(vp.pixel(i, j));
            if (r.label(i, j) == zero) inner = std::max(inner, rad);
            else if (r.label(i, j) != kJuliaProxy) outer = std::min(outer, rad);
        }
    CHECK(std::abs(inner - 1.0) <= vp.pixel_width());
    CHECK(std::abs(outer - 1.0) <= vp.pixel_width());
}

TEST_CASE("render is deterministic across thread counts") {
    const Viewport vp{Complex(0.1, 0.2), 3.0, 96, 64};
    const auto map = RationalMap::polynomial({-1, 0, 1});
    const auto cycles = attracting_cycles(map);
    std::ostringstream a, b;
    write_ppm(a, render(map, vp, cycles, 300, 1));
    write_ppm(b, render(map, vp, cycles, 300, 4));
    CHECK(a.str() == b.str());
    CHECK(a.str().rfind("P6\n96 64\n255\n", 0) == 0);
    CHECK(a.str().size() == std::string("P6\n96 64\n255\n").size() + 96 * 64 * 3);
}

TEST_CASE("viewport validation") {
    CHECK_THROWS_AS((Viewport{0.0, 0.0, 64, 64}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((Viewport{0.0, 1.0, 32, 64}.validate()), std::invalid_argument);
    const Viewport vp{0.0, 2.0, 64, 64};
    CHECK(vp.pixel(0, 0).real() < 0.0);
    CHECK(vp.pixel(0, 0).imag() > 0.0);
}

TEST_CASE("realized example pair has exactly two basins") {
    const RationalMap cubic_f = RationalMap::polynomial({0, 0, 1, 4.0 / 9.0});
    const RationalMap cubic_g = RationalMap::polynomial({0, 0, 1, Complex(0.005542409185267151, 0.4057814923715365)});
    const auto rep = realize(MatingSpec{cubic_f, cubic_g});
    REQUIRE(rep.primary);
    const auto& R = rep.solutions[*rep.primary].R;
    const auto cycles = attracting_cycles(R);
    REQUIRE(cycles.size() == 2);
    CHECK(cycle_at(cycles, Complex(0.0)) >= 0);
    CHECK(cycle_at(cycles, SpherePoint::infinity()) >= 0);
    const auto r = render(R, Viewport{0.0, 6.0, 128, 128}, cycles);
    const auto h = r.histogram();
    CHECK(h[1] > 0);
    CHECK(h[2] > 0);
}
