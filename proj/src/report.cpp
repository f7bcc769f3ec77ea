#include "jm/report.hpp"

namespace jm {

Json to_json(Complex z) { return Json::array({z.real(), z.imag()}); }

Json to_json(const SpherePoint& p) { return p.is_infinity() ? Json("inf") : to_json(p.value()); }

namespace {

Json complex_list(const std::vector<Complex>& v) {
    Json a = Json::array();
    for (const auto& z : v) a.push_back(to_json(z));
    return a;
}

}  // namespace

Json to_json(const RationalMap& map) {
    return Json{{"degree", map.degree()}, {"num", complex_list(map.num())}, {"den", complex_list(map.den())}};
}

Json to_json(const CriticalOrbitPortrait& p) {
    Json nodes = Json::array();
    for (const auto& n : p.nodes) {
        Json j{{"labels", n.labels}, {"point", to_json(n.point)}, {"local_degree", n.local_degree}, {"next", n.next}};
        if (n.marked) j["marked"] = true;
        if (n.boundary_angle) j["boundary_angle"] = to_string(*n.boundary_angle);
        nodes.push_back(j);
    }
    return Json{{"map_degree", p.map_degree}, {"nodes", nodes}};
}

Json to_json(const SolveReport& rep) {
    Json sols = Json::array();
    for (const auto& s : rep.solutions)
        sols.push_back(Json{{"params", complex_list(s.params)},
                            {"critical", to_json(s.critical)},
                            {"residual", s.residual},
                            {"attracted_to_marked", s.attracted_to_marked},
                            {"on_boundary", s.on_boundary},
                            {"seed_index", s.seed_index},
                            {"map", to_json(s.map)}});
    return Json{{"solutions", sols},
                {"converged_seeds", rep.converged_seeds},
                {"best_residual", rep.best_residual},
                {"notes", rep.notes}};
}

Json to_json(const RealizedMating& rm) {
    Json match = Json::object();
    for (const auto& [label, node] : rm.portrait_match) match[label] = node;
    return Json{{"map", to_json(rm.R)},
                {"params", complex_list(rm.params)},
                {"critical", complex_list(rm.critical)},
                {"residuals", rm.residuals},
                {"max_residual", rm.max_residual()},
                {"normalization", rm.normalization},
                {"portrait_match", match},
                {"external_angles_match", rm.external_angles_match},
                {"seed_index", rm.seed_index}};
}

Json to_json(const RealizeReport& rep) {
    Json sols = Json::array();
    for (const auto& s : rep.solutions) sols.push_back(to_json(s));
    Json eqs = Json::array();
    for (const auto& e : rep.family.equations) eqs.push_back(e.text);
    Json ext = Json::array();
    for (const auto& e : rep.external) {
        Json angles = Json::array();
        for (const auto& a : e.angles) angles.push_back(to_string(a));
        ext.push_back(Json{{"label", e.label}, {"side", std::string(1, e.side)}, {"angles", angles}});
    }
    Json j{{"degree", rep.family.degree},
           {"normalization", rep.family.normalization},
           {"unknowns", rep.family.unknowns},
           {"equations", eqs},
           {"merged_portrait", to_json(rep.merged)},
           {"external_angles", ext},
           {"seeds", rep.seeds},
           {"converged_seeds", rep.converged_seeds},
           {"best_residual", rep.best_residual},
           {"solutions", sols},
           {"notes", rep.notes}};
    j["primary"] = rep.primary ? Json(*rep.primary) : Json(nullptr);
    return j;
}

Json to_json(const RealizationReport& rep) {
    Json degs = Json::array();
    for (const auto& d : rep.local_degrees)
        degs.push_back(Json{{"label", d.label}, {"expected", d.expected}, {"measured", d.measured}});
    return Json{{"ok", rep.ok()},
                {"degree", rep.degree},
                {"preimage_samples", rep.preimage_samples},
                {"preimage_failures", rep.preimage_failures},
                {"preimage_residual", rep.preimage_residual},
                {"max_relation_residual", rep.max_relation_residual},
                {"local_degrees", degs},
                {"portrait_isomorphic", rep.portrait_isomorphic},
                {"expected_cycles", rep.expected_cycles},
                {"found_cycles", rep.found_cycles},
                {"basin_fraction", rep.basin_fraction},
                {"perturbed_residual", rep.perturbed_residual},
                {"tol", rep.tol}};
}

Json to_json(const GluingReport& rep) {
    return Json{{"ok", rep.ok()},
                {"k", rep.k},
                {"d0", rep.d0},
                {"alpha", to_json(rep.alpha)},
                {"monotone", rep.monotone},
                {"monotonicity_margin", rep.monotonicity_margin},
                {"angle_winding", rep.angle_winding},
                {"polygon_winding", rep.polygon_winding},
                {"equivariance_defect", rep.equivariance_defect},
                {"tol", rep.tol},
                {"exponent_note", rep.exponent_note}};
}

Json to_json(const CircleModelReport& rep) {
    return Json{{"samples", rep.samples}, {"circle_error", rep.circle_error}, {"continuity_error", rep.continuity_error}};
}

Json to_json(const HarnessReport& rep) {
    Json rows = Json::array();
    for (const auto& r : rep.rows) {
        Json row{{"index", r.index},
                 {"class", to_string(r.cls.tag)},
                 {"peripheral", r.cls.peripheral},
                 {"K", r.cls.K},
                 {"N", r.cls.N},
                 {"components", r.components},
                 {"nonperipheral", r.nonperipheral},
                 {"multiplicity_total", r.multiplicity_total},
                 {"ess", r.ess_ok},
                 {"oo_lhs", r.oo_lhs},
                 {"oo_rhs", r.oo_rhs},
                 {"oo_violations", r.oo_violations},
                 {"oo_equalities", r.oo_equalities},
                 {"ev", r.ev}};
        if (!r.error.empty()) row["error"] = r.error;
        rows.push_back(row);
    }
    return Json{{"ok", rep.ok()},
                {"degree", rep.degree},
                {"ev_depth", rep.ev_depth},
                {"oo_violations", rep.oo_violations},
                {"ess_violations", rep.ess_violations},
                {"multiplicity_mismatches", rep.multiplicity_mismatches},
                {"ev_unminimized", rep.ev_unminimized},
                {"failures", rep.failures},
                {"rows", rows}};
}

Json to_json(const Raster& raster) {
    const auto& vp = raster.viewport;
    return Json{{"center", to_json(vp.center)},
                {"width", vp.width},
                {"pixels", {vp.w, vp.h}},
                {"cycles", raster.cycles},
                {"histogram", raster.histogram()}};
}

}  // namespace jm
