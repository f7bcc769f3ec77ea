#include "doctest.h"

#include <cmath>

#include "jm/realizer.hpp"

using namespace jm;

namespace {

const Complex kF(4.0 / 9.0, 0.0);
const Complex kG(0.005542409185267151, 0.4057814923715365);

RationalMap cubic(Complex a) { return RationalMap::polynomial({0, 0, 1, a}); }
RationalMap square() { return RationalMap::polynomial({0, 0, 1}); }

}  // namespace

TEST_CASE("z^2 mated with z^2 is z^2") {
    const MatingSpec spec{square(), square()};
    const auto merged = mated_portrait(spec);
    CHECK(merged.map_degree == 2);
    const auto fam = build_family(merged);
    CHECK(fam.unknown_count() == 0);
    CHECK(fam.m0 == 2);
    CHECK(fam.m_inf == 2);
    const auto rep = realize(spec);
    REQUIRE(rep.solutions.size() == 1);
    const auto& R = rep.solutions[0].R;
    CHECK(R.degree() == 2);
    CHECK(std::abs(R(Complex(0.3, 0.2)).value() - Complex(0.3, 0.2) * Complex(0.3, 0.2)) < 1e-15);
    const auto v = verify_realization(rep.solutions[0], rep.family, rep.merged);
    CHECK(v.preimage_failures == 0);
    CHECK(v.degrees_ok());
    CHECK(v.ok());
}

TEST_CASE("family of the example pair") {
    const auto merged = mated_portrait({cubic(kF), cubic(kG)});
    CHECK(merged.map_degree == 4);
    CHECK(merged.budget() == 6);
    const auto fam = build_family(merged);
    MESSAGE(fam.describe());
    CHECK(fam.m0 == 3);
    CHECK(fam.m_inf == 3);
    CHECK(fam.unknown_count() == 2);
    REQUIRE(fam.equations.size() == 2);
    CHECK(fam.critical_labels.front() == "f.c1");
    CHECK(fam.equations[0].text == "R^2(c1) = R(c1)");
    CHECK(fam.equations[1].text == "R(c2) = c1");
    // The critical point pinned at 1 is critical for every member.
    const auto r = fam.instantiate(std::vector<Complex>{Complex(0.3, 1.0), Complex(-2.0, 0.5)});
    CHECK(std::abs(r.derivative(Complex(1.0))) < 1e-12);
}

TEST_CASE("realization of the example pair") {
    const auto rep = realize(MatingSpec{cubic(kF), cubic(kG)});
    MESSAGE(rep.solutions.size() << " solutions from " << rep.converged_seeds << " converged seeds");
    bool anchor = false;
    for (const auto& s : rep.solutions) {
        MESSAGE("p = " << s.params[0] << ", q1 = " << s.params[1] << ", residual " << s.max_residual());
        CHECK(s.R.degree() == 4);
        CHECK(s.max_residual() < 1e-10);
        if (std::abs(s.params[0] - Complex(0.459415, -3.525093)) < 1e-5 &&
            std::abs(s.params[1] - Complex(-0.754674, 6.175815)) < 1e-5)
            anchor = true;
    }
    CHECK(anchor);
    for (const auto& e : rep.external)
        for (const auto& a : e.angles) MESSAGE(e.label << " side " << e.side << " angle " << to_string(a));
    int flagged = 0;
    for (const auto& s : rep.solutions) {
        if (!s.external_angles_match) continue;
        ++flagged;
        MESSAGE("external angles match at p = " << s.params[0]);
    }
    CHECK(flagged >= 1);
    REQUIRE(rep.primary);
    CHECK(rep.solutions[*rep.primary].external_angles_match);
    const auto v = verify_realization(rep.solutions[*rep.primary], rep.family, rep.merged);
    MESSAGE("basin fraction " << v.basin_fraction << ", perturbed " << v.perturbed_residual);
    CHECK(v.preimage_failures == 0);
    CHECK(v.max_relation_residual < 1e-10);
    CHECK(v.degrees_ok());
    CHECK(v.portrait_isomorphic);
    CHECK(v.perturbed_residual > 1e-4);
}

TEST_CASE("z^2 mated with the f example has degree 3") {
    const auto rep = realize(MatingSpec{square(), cubic(kF)});
    CHECK(rep.family.degree == 3);
    bool anchor = false;
    for (const auto& s : rep.solutions) {
        CHECK(s.max_residual() < 1e-10);
        if (std::abs(s.params[0] + 1.5) < 1e-9) anchor = true;
    }
    CHECK(anchor);
    const auto v = verify_realization(rep.solutions.front(), rep.family, rep.merged);
    CHECK(v.ok());
}

TEST_CASE("unsupported shapes are rejected") {
    CriticalOrbitPortrait p;
    p.map_degree = 3;
    p.nodes.push_back(PortraitNode{{"a"}, SpherePoint(0.0), 2, false, 0});
    CHECK_THROWS_AS(build_family(p), Unsupported);
}
