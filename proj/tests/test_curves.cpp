#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "jm/curves.hpp"
#include "jm/realizer.hpp"

using namespace jm;

namespace {

const Interface& unit() {
    static const Interface T = Interface::circle(4096);
    return T;
}

// Polar path (r, turns) sampled densely between the given corners.
PolygonalCurve polar_curve(const std::vector<std::pair<double, double>>& corners, int per_edge = 64) {
    PolygonalCurve c;
    for (std::size_t i = 0; i < corners.size(); ++i) {
        const auto [r0, t0] = corners[i];
        const auto [r1, t1] = corners[(i + 1) % corners.size()];
        for (int k = 0; k < per_edge; ++k) {
            const double u = static_cast<double>(k) / per_edge;
            c.vertices.push_back(std::polar(r0 + u * (r1 - r0), kTwoPi * (t0 + u * (t1 - t0))));
        }
    }
    return c;
}

PolygonalCurve circle(Complex center, double r, int n = 256) {
    PolygonalCurve c;
    for (int j = 0; j < n; ++j) c.vertices.push_back(center + std::polar(r, kTwoPi * j / n));
    return c;
}

MarkedPoint point(const std::string& label, SpherePoint z, char origin, bool periodic, int image) {
    MarkedPoint x;
    x.label = label;
    x.z = z;
    x.origin = origin;
    x.periodic = periodic;
    x.image = image;
    return x;
}

RationalMap cubic(Complex a) { return RationalMap::polynomial({0, 0, 1, a}); }

}  // namespace

TEST_CASE("curve disjoint from T has no segments") {
    const auto s = segment_curve(circle(0.0, 2.0), unit());
    CHECK(s.segments.empty());
    CHECK(s.K == 0);
    MarkedPoints m;
    m.points.push_back(point("a", Complex(0.5, 0.0), 'f', true, 0));
    CHECK(classify_curve(circle(0.0, 2.0), unit(), m).tag == CurveClass::Tag::Lambda);
}

TEST_CASE("lens crossing T twice") {
    // Out at angle 0, back in at a quarter turn.
    const auto lens = polar_curve({{0.8, 0.0}, {1.3, 0.0}, {1.3, 0.25}, {0.8, 0.25}});
    const auto s = segment_curve(lens, unit());
    REQUIRE(s.segments.size() == 2);
    CHECK(s.K == 1);
    int p = 0, r = 0;
    for (const auto& seg : s.segments) {
        (seg.side == TypedSegment::Side::P ? p : r)++;
        // I is the short quarter arc.
        CHECK(std::fmod(seg.chord_to - seg.chord_from + 1.0, 1.0) == doctest::Approx(0.25).epsilon(1e-6));
    }
    CHECK(p == 1);
    CHECK(r == 1);
}

TEST_CASE("segmentation partitions the curve") {
    const auto lens = polar_curve({{0.8, 0.0}, {1.3, 0.0}, {1.3, 0.25}, {0.8, 0.25}});
    const auto s = segment_curve(lens, unit());
    std::size_t interior = 0;
    for (const auto& seg : s.segments) interior += seg.arc.size() - 2;
    CHECK(interior == lens.vertices.size());
}

TEST_CASE("nested type P segments count twice") {
    const auto c = polar_curve({{0.5, 0.02}, {3.0, 0.1}, {3.0, 0.4}, {0.8, 0.4}, {0.8, 0.35}, {2.0, 0.35},
                                {2.0, 0.15}, {0.7, 0.15}, {0.6, 0.05}});
    const auto s = segment_curve(c, unit());
    CHECK(s.K == 2);
    CHECK(count_N(point("deep", std::polar(1.5, kTwoPi * 0.25), 'f', true, 0), s) == 2);
    CHECK(count_N(point("outer", std::polar(2.5, kTwoPi * 0.25), 'f', true, 0), s) == 1);
    CHECK(count_N(point("far", Complex(-5.0, 0.0), 'f', true, 0), s) == 0);
    // On T, by parameter: inside both chords, then inside only the outer one.
    MarkedPoint on = point("on", std::polar(1.0, kTwoPi * 0.25), 'f', true, 0);
    on.t = 0.25;
    CHECK(count_N(on, s) == 2);
    on.t = 0.12;
    on.z = std::polar(1.0, kTwoPi * 0.12);
    CHECK(count_N(on, s) == 1);
}

TEST_CASE("membership near a boundary is ambiguous") {
    const auto lens = polar_curve({{0.8, 0.0}, {1.3, 0.0}, {1.3, 0.25}, {0.8, 0.25}});
    const auto s = segment_curve(lens, unit());
    for (const auto& seg : s.segments) {
        if (seg.side != TypedSegment::Side::P) continue;
        CHECK_THROWS_AS(region_contains(seg, point("b", seg.arc[seg.arc.size() / 2], 'f', true, 0)),
                        AmbiguousMembership);
    }
}

TEST_CASE("winding membership agrees with ray casting") {
    MarkedPoints none;
    const auto curves = random_curves(unit(), none, 40, 11);
    REQUIRE(curves.size() == 40);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(-3.0, 3.0);
    int checked = 0, disagreements = 0;
    for (const auto& c : curves) {
        const auto s = segment_curve(c, unit());
        for (const auto& seg : s.segments)
            for (int k = 0; k < 5; ++k) {
                const Complex z(U(rng), U(rng));
                if (distance_to_polygon(seg.region, z) < 1e-6) continue;
                ++checked;
                if (region_contains(seg, point("z", z, 'f', false, 0)) != region_contains_raycast(seg, z)) ++disagreements;
            }
    }
    CHECK(checked > 100);
    CHECK(disagreements == 0);
}

TEST_CASE("classification by periodic and preperiodic points") {
    MarkedPoints m;
    m.points.push_back(point("p", std::polar(1.2, 0.3), 'f', true, 0));   // periodic, outside T
    m.points.push_back(point("q", std::polar(1.2, 2.5), 'f', false, 0));  // preperiodic
    m.points.push_back(point("u", 0.0, 'g', true, 2));
    m.points.push_back(point("w", SpherePoint::infinity(), 'f', true, 3));
    const auto around_p = polar_curve({{0.9, 0.02}, {1.5, 0.02}, {1.5, 0.08}, {0.9, 0.08}});
    CHECK(classify_curve(around_p, unit(), m).tag == CurveClass::Tag::Sigma);
    CHECK(classify_curve(around_p, unit(), m).peripheral);
    const double tq = 2.5 / kTwoPi;
    const auto around_q = polar_curve({{0.9, tq - 0.03}, {1.5, tq - 0.03}, {1.5, tq + 0.03}, {0.9, tq + 0.03}});
    CHECK(classify_curve(around_q, unit(), m).tag == CurveClass::Tag::Pi);
    // Enclosing p and the inside center, leaving q and infinity out.
    CHECK_FALSE(is_peripheral(circle(Complex(0.3, 0.0), 1.1), m));
}

TEST_CASE("pullbacks under z^2") {
    const auto sq = RationalMap::polynomial({0, 0, 1});
    const auto big = pullback_curve(sq, circle(0.0, 4.0));
    REQUIRE(big.size() == 1);
    CHECK(big[0].multiplicity == 2);
    CHECK(big[0].residual < 1e-12);
    // Subdivided polygon edges dip slightly inside the radius 4 circle.
    for (const auto& v : big[0].curve.vertices) CHECK(std::abs(v) == doctest::Approx(2.0).epsilon(1e-4));

    const auto small = pullback_curve(sq, circle(1.0, 0.1));
    REQUIRE(small.size() == 2);
    for (const auto& c : small) {
        CHECK(c.multiplicity == 1);
        CHECK(c.residual < 1e-12);
        CHECK(std::abs(std::abs(c.curve.vertices.front()) - 1.0) < 0.1);
    }
}

TEST_CASE("invariant interface of z^2 is the unit circle") {
    const auto fit = invariant_interface(RationalMap::polynomial({0, 0, 1}), 2, {}, 256);
    CHECK(fit.converged);
    for (const auto& p : fit.T.points()) CHECK(std::abs(p) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("harness on z^2 is vacuous") {
    MarkedPoints m;
    m.points.push_back(point("g.inf", 0.0, 'g', true, 0));
    m.points.push_back(point("f.inf", SpherePoint::infinity(), 'f', true, 1));
    const auto curves = random_curves(unit(), m, 10, 3);
    const auto rep = run_lemma_harness(RationalMap::polynomial({0, 0, 1}), unit(), m, curves);
    CHECK(rep.ok());
    for (const auto& r : rep.rows) {
        CHECK(r.multiplicity_total == 2);
        CHECK(r.ev == "vacuous");
    }
}

TEST_CASE("harness on the realized example pair") {
    const Complex kF(4.0 / 9.0, 0.0);
    const Complex kG(0.005542409185267151, 0.4057814923715365);
    const auto rep = realize(MatingSpec{cubic(kF), cubic(kG)});
    REQUIRE(rep.primary);
    const auto& rm = rep.solutions[*rep.primary];
    const auto marked = mating_marked_points(rm, rep.merged);
    const auto fit = invariant_interface(rm.R, 2, marked, 2048);
    CHECK(fit.converged);
    CHECK(fit.marked_error < 1e-12);
    for (std::size_t j = 0; j < fit.T.size(); ++j)
        CHECK(std::abs(rm.R(fit.T.points()[j]).value() - fit.T.points()[(2 * j) % fit.T.size()]) < 1e-10);

    std::vector<PolygonalCurve> curves;
    for (auto& c : random_curves(fit.T, marked, 60, 7))
        if (!is_peripheral(c, marked) && curves.size() < 12) curves.push_back(std::move(c));
    REQUIRE(curves.size() == 12);
    const auto h = run_lemma_harness(rm.R, fit.T, marked, curves);
    CHECK(h.failures == 0);
    CHECK(h.multiplicity_mismatches == 0);
    CHECK(h.oo_violations == 0);
    CHECK(h.ess_violations == 0);
    for (const auto& r : h.rows) CHECK(r.multiplicity_total == 4);
}

TEST_CASE("curve csv round trip") {
    const auto c = circle(Complex(0.5, -0.25), 1.5, 32);
    std::stringstream ss;
    write_curve_csv(ss, c);
    const auto back = read_curve_csv(ss);
    REQUIRE(back.vertices.size() == c.vertices.size());
    for (std::size_t i = 0; i < c.vertices.size(); ++i) CHECK(back.vertices[i] == c.vertices[i]);
}
