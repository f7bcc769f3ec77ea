#include "doctest.h"

#include <algorithm>

#include "jm/portrait.hpp"

using namespace jm;

namespace {

FamilySpec cubic(const std::string& relation) {
    FamilySpec s;
    s.name = "cubic";
    s.params = {"a"};
    s.num = {"0", "0", "1", "a"};
    s.relations = {relation};
    s.normalization = "z^2 + a z^3";
    return s;
}

// Regression anchors from the seed-grid runs.
const Complex kF(4.0 / 9.0, 0.0);
const Complex kG(0.005542409185267151, 0.4057814923715365);

}  // namespace

TEST_CASE("Angle normalisation") {
    CHECK(Angle::of(3, 6) == Angle{1, 2});
    CHECK(Angle::of(-1, 4) == Angle{3, 4});
    CHECK(Angle::of(5, 4) == Angle{1, 4});
    CHECK(Angle::of(0, 7) == Angle{0, 1});
}

TEST_CASE("parse_relation") {
    const auto f = parse_relation("f^2(c) = f(c)");
    CHECK(f.map_symbol == "f");
    CHECK(f.point == "c");
    CHECK(f.shape() == OrbitShape{1, 1});

    const auto g = parse_relation("g^3(c) = g^{2}(c) != g(c)");
    CHECK(g.shape() == OrbitShape{2, 1});
    REQUIRE(g.inequations.size() == 1);
    CHECK(g.inequations[0] == std::pair<int, int>{2, 1});

    CHECK(parse_relation("f(c) = c").shape() == OrbitShape{0, 1});
    CHECK(parse_relation("g^3(c) = g^2(c) ≠ g(c)").inequations.size() == 1);

    CHECK_THROWS_AS(parse_relation("f^(c) = c"), std::invalid_argument);
    CHECK_THROWS_AS(parse_relation("f(c) != c"), std::invalid_argument);
    CHECK_THROWS_AS(parse_relation("f(c) = f(c)"), std::invalid_argument);
    try {
        parse_relation("f^2(c) = f(c");
        FAIL("no throw");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("column 13") != std::string::npos);
    }
}

TEST_CASE("portrait_of z^2") {
    const auto p = portrait_of(RationalMap::polynomial({0, 0, 1}), {.marked = SpherePoint(0.0)});
    REQUIRE(p.nodes.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(p.nodes[i].local_degree == 2);
        CHECK(p.nodes[i].next == static_cast<int>(i));
    }
    REQUIRE(p.marked());
    CHECK(p.nodes[static_cast<std::size_t>(*p.marked())].point.value() == Complex(0));
    CHECK(p.budget() == 2);
}

TEST_CASE("portrait_of z^2 - (2/9) z^3: three fixed critical points") {
    const auto p = portrait_of(RationalMap::polynomial({0, 0, 1, -2.0 / 9.0}));
    REQUIRE(p.nodes.size() == 3);
    bool saw3 = false;
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(p.nodes[i].next == static_cast<int>(i));
        if (p.nodes[i].point.is_finite() && std::abs(p.nodes[i].point.value() - 3.0) < 1e-12) saw3 = true;
    }
    CHECK(saw3);
}

TEST_CASE("portrait_of rejects maps that are not postcritically finite") {
    // Chaotic real critical orbit.
    CHECK_THROWS_AS(portrait_of(RationalMap::polynomial({-1.9, 0, 1})), NotPostcriticallyFinite);
    // Critical orbit converging to an attracting, non-superattracting fixed point.
    CHECK_THROWS_AS(portrait_of(RationalMap::polynomial({0.2, 0, 1})), NotPostcriticallyFinite);
}

TEST_CASE("solve_family: closed-form control f(c) = c") {
    const auto rep = solve_family(cubic("f(c) = c"), {{Complex(-0.3, 0)}});
    REQUIRE(rep.solutions.size() == 1);
    CHECK(std::abs(rep.solutions[0].params[0] - Complex(-2.0 / 9.0)) < 1e-12);
    CHECK(std::abs(rep.solutions[0].critical - 3.0) < 1e-11);
}

TEST_CASE("solve_family: f^2(c) = f(c), f(c) != 0") {
    const auto rep = solve_family(cubic("f^2(c) = f(c)"), grid_seeds(-3, 3, 13));
    REQUIRE(!rep.solutions.empty());
    for (const auto& s : rep.solutions) {
        CHECK(s.residual < 1e-12);
        CHECK_FALSE(s.attracted_to_marked);
        CHECK(std::abs(s.params[0] - kF) < 1e-12);
    }
    CHECK(rep.solutions.size() == 1);
    // a = -2/9 solves the equation but has f(c) = c; it must be filtered, never returned.
    const auto& s = rep.solutions[0];
    CHECK(std::abs(s.critical + 1.5) < 1e-12);
    CHECK(s.on_boundary);
}

TEST_CASE("solve_family: g^3(c) = g^2(c) != g(c)") {
    const auto rep = solve_family(cubic("g^3(c) = g^{2}(c) != g(c)"), grid_seeds(-3, 3, 13));
    REQUIRE(!rep.solutions.empty());
    bool anchor = false;
    for (const auto& s : rep.solutions) {
        CHECK(s.residual < 1e-12);
        CHECK_FALSE(s.attracted_to_marked);
        // Re-verification reproduces the relation graph.
        const auto p = portrait_of(s.map, {.marked = SpherePoint(0.0)});
        int matches = 0;
        for (std::size_t i = 0; i < p.nodes.size(); ++i)
            if (p.nodes[i].critical() && !p.nodes[i].marked && p.nodes[i].point.is_finite())
                matches += orbit_shape(p, static_cast<int>(i)) == OrbitShape{2, 1};
        CHECK(matches == 1);
        anchor = anchor || std::abs(s.params[0] - kG) < 1e-10 || std::abs(s.params[0] - std::conj(kG)) < 1e-10;
    }
    CHECK(anchor);
}

TEST_CASE("solve_family reports when nothing converges") {
    CHECK_THROWS_AS(solve_family(cubic("f^2(c) = f(c)"), {{Complex(-2.0 / 9.0 + 1e-3, 0)}},
                                 SolveOptions{.tol = 1e-30}),
                    NoSolution);
}

TEST_CASE("merge_portraits degree law") {
    const auto sq = portrait_of(RationalMap::polynomial({0, 0, 1}), {.marked = SpherePoint(0.0)});
    const auto pf = portrait_of(RationalMap::polynomial({0, 0, 1, kF}), {.marked = SpherePoint(0.0)});
    const auto pg = portrait_of(RationalMap::polynomial({0, 0, 1, kG}), {.marked = SpherePoint(0.0)});

    const auto m22 = merge_portraits(sq, sq, 2);
    CHECK(m22.nodes.size() == 2);
    CHECK(m22.budget() == 2);
    CHECK(m22.implied_degree() == 2);
    for (const auto& n : m22.nodes) CHECK(n.local_degree == 2);

    const auto m2f = merge_portraits(sq, pf, 2);
    CHECK(m2f.budget() == 4);
    CHECK(m2f.implied_degree() == 3);

    const auto mfg = merge_portraits(pf, pg, 2);
    CHECK(mfg.budget() == 6);
    CHECK(mfg.implied_degree() == 4);
    CHECK(mfg.map_degree == 4);
    int deg3 = 0;
    for (const auto& n : mfg.nodes) deg3 += n.local_degree == 3;
    CHECK(deg3 == 2);
}

TEST_CASE("merge_portraits identifies boundary angles") {
    auto pf = portrait_of(RationalMap::polynomial({0, 0, 1, kF}), {.marked = SpherePoint(0.0)});
    auto pg = portrait_of(RationalMap::polynomial({0, 0, 1, kG}), {.marked = SpherePoint(0.0)});
    // c_f at 1/2 -> f(c_f) at 0; c_g at 1/4 -> 1/2 -> 0.
    pf.nodes[static_cast<std::size_t>(*pf.find("c1"))].boundary_angle = Angle::of(1, 2);
    pf.nodes[static_cast<std::size_t>(*pf.find("c1^1"))].boundary_angle = Angle::of(0, 1);
    pg.nodes[static_cast<std::size_t>(*pg.find("c1"))].boundary_angle = Angle::of(1, 4);
    pg.nodes[static_cast<std::size_t>(*pg.find("c1^1"))].boundary_angle = Angle::of(1, 2);
    pg.nodes[static_cast<std::size_t>(*pg.find("c1^2"))].boundary_angle = Angle::of(0, 1);

    const auto m = merge_portraits(pf, pg, 2);
    CHECK(m.nodes.size() == 5);
    CHECK(m.budget() == 6);
    const auto cf = m.find("f.c1");
    REQUIRE(cf);
    CHECK(m.find("g.c1^1") == cf);
    CHECK(m.find("g.c1^2") == m.find("f.c1^1"));
    const auto cg = m.find("g.c1");
    REQUIRE(cg);
    CHECK(m.nodes[static_cast<std::size_t>(*cg)].next == *cf);
    CHECK(orbit_shape(m, *cg) == OrbitShape{2, 1});
    CHECK(m.nodes[static_cast<std::size_t>(*cg)].boundary_angle == Angle::of(3, 4));
}

TEST_CASE("merge_portraits rejects malformed input") {
    const auto sq = portrait_of(RationalMap::polynomial({0, 0, 1}), {.marked = SpherePoint(0.0)});
    const auto cube = portrait_of(RationalMap::polynomial({0, 0, 0, 1}), {.marked = SpherePoint(0.0)});
    CHECK_THROWS_AS(merge_portraits(sq, cube, 2), std::invalid_argument);
    const auto unmarked = portrait_of(RationalMap::polynomial({0, 0, 1}));
    CHECK_THROWS_AS(merge_portraits(sq, unmarked, 2), std::invalid_argument);
}

TEST_CASE("isomorphic") {
    const auto a = portrait_of(RationalMap::polynomial({0, 0, 1, kG}));
    const auto b = portrait_of(RationalMap::polynomial({0, 0, 1, std::conj(kG)}));
    CHECK(isomorphic(a, b));
    const auto c = portrait_of(RationalMap::polynomial({0, 0, 1, kF}));
    CHECK_FALSE(isomorphic(a, c));
    const auto sq = portrait_of(RationalMap::polynomial({0, 0, 1}));
    CHECK(isomorphic(sq, sq));
    CHECK_FALSE(isomorphic(sq, portrait_of(RationalMap::polynomial({0, 0, 1}), {.marked = SpherePoint(0.0)})));
}
