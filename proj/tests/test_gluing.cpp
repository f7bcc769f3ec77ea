#include "doctest.h"

#include <cmath>
#include <sstream>

#include "jm/gluing.hpp"

using namespace jm;

namespace {

const Complex kF(4.0 / 9.0, 0.0);
const Complex kG(0.005542409185267151, 0.4057814923715365);

RationalMap cubic(Complex a) { return RationalMap::polynomial({0, 0, 1, a}); }
RationalMap square() { return RationalMap::polynomial({0, 0, 1}); }

BoettcherChart chart(const RationalMap& m) { return BoettcherChart(m, SpherePoint(0.0)); }

}  // namespace

TEST_CASE("identity charts glue by reflection") {
    const auto gm = build_gluing(chart(square()), chart(square()), 1, 64);
    CHECK(gm.alpha() == Complex(1.0));
    for (std::size_t j = 0; j < gm.size(); ++j) {
        const double t = gm.angles_g()[j];
        CHECK(std::abs(gm.points_f()[j].value() - std::polar(1.0 - 1e-4, -kTwoPi * t)) < 1e-12);
    }
    const auto r = verify_gluing(gm, 1e-12);
    CHECK(r.monotone);
    CHECK(r.polygon_winding == -1);
    CHECK(r.angle_winding == doctest::Approx(-1.0));
    CHECK(r.equivariance_defect < 1e-12);
    CHECK(r.ok());
}

TEST_CASE("gluing rejects mismatched degrees and bad indices") {
    CHECK_THROWS_AS(build_gluing(chart(square()), chart(RationalMap::polynomial({0, 0, 0, 1})), 1, 64),
                    std::invalid_argument);
    CHECK_THROWS_AS(build_gluing(chart(square()), chart(square()), 2, 64), std::invalid_argument);
}

TEST_CASE("cubic degree three basins have two gluings") {
    const auto c = chart(RationalMap::polynomial({0, 0, 0, 1}));
    for (int k = 1; k <= 2; ++k) {
        const auto gm = build_gluing(c, c, k, 64);
        CHECK(std::abs(gm.alpha() - (k == 1 ? Complex(-1.0) : Complex(1.0))) < 1e-15);
        CHECK(verify_gluing(gm, 1e-10).ok());
    }
}

TEST_CASE("gluing of the example pair") {
    const auto gm = build_gluing(chart(cubic(kF)), chart(cubic(kG)), 1, 512);
    const auto r = verify_gluing(gm, 1e-5);
    MESSAGE("defect " << r.equivariance_defect << ", margin " << r.monotonicity_margin);
    CHECK(r.monotone);
    CHECK(r.monotonicity_margin > 0.0);
    CHECK(r.polygon_winding == -1);
    CHECK(r.equivariance_defect < 1e-5);

    SUBCASE("wrong root of unity breaks equivariance") {
        const auto bad = build_gluing(chart(cubic(kF)), chart(cubic(kG)), 1, 128,
                                      {.alpha = std::polar(1.0, kPi / 3.0)});
        const auto rb = verify_gluing(bad, 1e-5);
        CHECK(rb.monotone);
        CHECK(rb.equivariance_defect > 1e-2);
        CHECK_FALSE(rb.ok());
    }
}

TEST_CASE("gluing csv") {
    const auto gm = build_gluing(chart(square()), chart(square()), 1, 16);
    std::ostringstream os;
    write_gluing_csv(os, gm);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "angle_g,angle_f");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 16);
}

TEST_CASE("circle model of z^2 mated with z^2") {
    const auto gm = std::make_shared<const GluingMap>(build_gluing(chart(square()), chart(square()), 1, 64));
    const TopologicalMatingModel model(gm);
    const Complex z = std::polar(1.5, 0.7);
    const auto e = eval_model(model, ModelPoint::outside(z));
    REQUIRE(e.side == ModelPoint::Side::Outside);
    CHECK(std::abs(e.z.value() - std::polar(2.25, 1.4)) < 1e-14);
    const auto c = eval_model(model, ModelPoint::on_circle(0.3));
    REQUIRE(c.side == ModelPoint::Side::OnCircle);
    CHECK(c.angle == doctest::Approx(0.6));
    // Inside lands in the glued g basin when g(z) sinks below the level curve.
    const auto i = eval_model(model, ModelPoint::inside(std::polar(0.998, 0.2)));
    REQUIRE(i.side == ModelPoint::Side::OnCircle);
    CHECK(i.angle == doctest::Approx(1.0 - 0.4 / kTwoPi));
}

TEST_CASE("circle model of the example pair") {
    const auto gm = std::make_shared<const GluingMap>(build_gluing(chart(cubic(kF)), chart(cubic(kG)), 1, 512));
    const TopologicalMatingModel model(gm);
    const auto r = check_circle_model(model, 64);
    MESSAGE("circle " << r.circle_error << ", continuity " << r.continuity_error);
    CHECK(r.circle_error < 1e-3);
    CHECK(r.continuity_error < 1e-3);

    // -1/a is a preimage of the f center: its image sits deep in D_f.
    CHECK_THROWS_AS(eval_model(model, ModelPoint::outside(-1.0 / kF)), ResolutionExceeded);
    // Far outside both basins the model is just f.
    const auto far = eval_model(model, ModelPoint::outside(Complex(5.0)));
    REQUIRE(far.side == ModelPoint::Side::Outside);
    CHECK(std::abs(far.z.value() - cubic(kF)(Complex(5.0)).value()) < 1e-12);
}
