#include "doctest.h"

#include <cmath>

#include "jm/config.hpp"
#include "jm/report.hpp"

using namespace jm;

TEST_CASE("coefficient maps and complex forms") {
    const auto c = parse_config(R"({
      "name": "t",
      "maps": {"p": {"coefficients": [0, "0.5-2i", [1, 1]]},
               "r": {"num": [0, 0, 1], "den": [1, "2i"], "center": "inf"}}
    })");
    REQUIRE(c.maps.size() == 2);
    const auto p = resolve_map(c.map("p"));
    CHECK(p.num()[1] == Complex(0.5, -2.0));
    CHECK(p.num()[2] == Complex(1.0, 1.0));
    CHECK(c.map("r").center.is_infinity());
    CHECK(resolve_map(c.map("r")).den()[1] == Complex(0.0, 2.0));
    CHECK_THROWS_AS(c.map("missing"), ConfigError);
}

TEST_CASE("parse errors carry line and column") {
    try {
        parse_config("{\n  \"name\": \"x\",\n  \"maps\": {,}\n}");
        FAIL("no error");
    } catch (const ConfigError& e) {
        CHECK(e.line() == 3);
        CHECK(e.column() == 12);
    }
}

TEST_CASE("unknown keys and bad values are rejected") {
    CHECK_THROWS_AS(parse_config(R"({"mapz": {}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"maps": {"f": {"coefficients": [0, "x"]}}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"maps": {"f": {"coefficients": [0, 0, 1]}}, "mating": {"f": "f", "g": "h"}})"),
                    ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"maps": {"f": {"coefficients": [0, 0, 1]}},
                                     "render": {"target": "f", "width": 2, "pixels": [10, 10]}})"),
                    ConfigError);
}

TEST_CASE("family maps solve and select") {
    const auto c = parse_config(R"cfg({
      "maps": {"g": {"family": {"params": ["a"], "num": ["0", "0", "1", "a"],
                                "relations": ["g^3(c) = g^2(c) != g(c)"]},
                     "select": [[0.0, 0.4]]}}
    })cfg");
    SolveReport rep;
    const auto g = resolve_map(c.map("g"), &rep);
    CHECK(rep.solutions.size() >= 2);
    CHECK(std::abs(g.num()[3] - Complex(0.005542409185267151, 0.4057814923715365)) < 1e-10);
    const auto j = to_json(rep);
    CHECK(j["solutions"].size() == rep.solutions.size());
}

TEST_CASE("json forms") {
    CHECK(to_json(SpherePoint::infinity()) == "inf");
    CHECK(to_json(Complex(1.0, -2.0)).dump() == "[1.0,-2.0]");
    CHECK(to_json(RationalMap::polynomial({0, 0, 1}))["degree"] == 2);
}
