#include "jm/realizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "jm/parallel.hpp"

namespace jm {

CriticalOrbitPortrait mated_portrait(const MatingSpec& spec) {
    auto pf = portrait_of(spec.f, PortraitOptions{.marked = spec.f_center});
    auto pg = portrait_of(spec.g, PortraitOptions{.marked = spec.g_center});
    annotate_boundary_angles(pf, BoettcherChart(spec.f, spec.f_center));
    annotate_boundary_angles(pg, BoettcherChart(spec.g, spec.g_center));
    return merge_portraits(pf, pg, spec.d0, spec.k);
}

std::vector<ExternalAngle> external_angles(const MatingSpec& spec, const CriticalOrbitPortrait& merged) {
    std::vector<ExternalAngle> out;
    for (const char side : {'f', 'g'}) {
        const RationalMap& map = side == 'f' ? spec.f : spec.g;
        auto p = portrait_of(map, PortraitOptions{.marked = side == 'f' ? spec.f_center : spec.g_center});
        // The other fixed critical node becomes 0 or infinity of R.
        std::optional<int> other;
        for (std::size_t i = 0; i < p.nodes.size(); ++i)
            if (!p.nodes[i].marked && p.nodes[i].critical() && p.nodes[i].next == static_cast<int>(i) &&
                (!other || p.nodes[i].label() == "inf"))
                other = static_cast<int>(i);
        if (!other) continue;
        const BoettcherChart chart(map, p.nodes[static_cast<std::size_t>(*other)].point);
        annotate_boundary_angles(p, chart);
        const std::string prefix(1, side);
        for (const auto& node : p.nodes) {
            if (!node.boundary_angle) continue;
            std::vector<Angle> angles{*node.boundary_angle};
            if (node.critical() && node.boundary_angle->den <= 4096)
                for (long j = 0; j < node.boundary_angle->den; ++j) {
                    const Angle a = Angle::of(j, node.boundary_angle->den);
                    if (!(a == angles.front()) && ray_lands_at(chart, a.turns(), node.point)) angles.push_back(a);
                }
            for (const auto& m : merged.nodes)
                if (std::find(m.labels.begin(), m.labels.end(), prefix + "." + node.label()) != m.labels.end())
                    out.push_back(ExternalAngle{m.label(), side, angles});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Normal form

namespace {

bool has_prefix(const PortraitNode& n, const std::string& prefix) {
    return std::any_of(n.labels.begin(), n.labels.end(),
                       [&](const std::string& l) { return l.rfind(prefix, 0) == 0; });
}

bool labelled_infinity(const PortraitNode& n) {
    return std::any_of(n.labels.begin(), n.labels.end(), [](const std::string& l) {
        return l == "inf" || (l.size() > 4 && l.compare(l.size() - 4, 4, ".inf") == 0);
    });
}

std::string iterate_text(const std::string& c, int n) {
    if (n == 0) return c;
    return "R" + (n == 1 ? std::string() : "^" + std::to_string(n)) + "(" + c + ")";
}

}  // namespace

MatingFamily build_family(const CriticalOrbitPortrait& merged) {
    MatingFamily fam;
    const int D = merged.map_degree;
    fam.degree = D;
    if (D < 2) throw Unsupported("build_family: degree " + std::to_string(D) + " below 2");
    if (merged.budget() != 2 * D - 2)
        throw Unsupported("build_family: critical budget " + std::to_string(merged.budget()) + " but 2D-2 = " +
                          std::to_string(2 * D - 2) + "\n" + describe(merged));

    std::vector<int> fixed;
    for (std::size_t i = 0; i < merged.nodes.size(); ++i)
        if (merged.nodes[i].critical() && merged.nodes[i].next == static_cast<int>(i)) fixed.push_back(static_cast<int>(i));
    if (fixed.size() > 2) {
        std::vector<int> inf;
        for (const int i : fixed)
            if (labelled_infinity(merged.nodes[static_cast<std::size_t>(i)])) inf.push_back(i);
        fixed = inf;
    }
    if (fixed.size() != 2)
        throw Unsupported("build_family: need two fixed critical nodes for 0 and infinity\n" + describe(merged));
    // The g side goes to 0.
    int zero = fixed[1], inf = fixed[0];
    if (has_prefix(merged.nodes[static_cast<std::size_t>(fixed[0])], "g.")) std::swap(zero, inf);
    const auto& zn = merged.nodes[static_cast<std::size_t>(zero)];
    const auto& in = merged.nodes[static_cast<std::size_t>(inf)];
    fam.zero_label = zn.label();
    fam.infinity_label = in.label();
    fam.m0 = zn.local_degree;
    fam.m_inf = in.local_degree;

    std::vector<int> free;
    for (const int i : merged.critical_nodes()) {
        if (i == zero || i == inf) continue;
        if (merged.nodes[static_cast<std::size_t>(i)].local_degree > 2)
            throw Unsupported("build_family: free critical node " + merged.nodes[static_cast<std::size_t>(i)].label() +
                              " is not simple\n" + describe(merged));
        free.push_back(i);
    }
    if (free.size() > 2)
        throw Unsupported("build_family: " + std::to_string(free.size()) +
                          " free critical points, at most 2 supported\n" + describe(merged));

    // Pin a node that another free critical orbit runs into, so the
    // equation reads R^n(c2) = 1.
    for (std::size_t a = 0; a < free.size(); ++a)
        for (const int n : orbit_nodes(merged, free[a]))
            if (n != free[a] && std::find(free.begin(), free.end(), n) != free.end() && free.front() != n) {
                std::iter_swap(free.begin(), std::find(free.begin(), free.end(), n));
                break;
            }
    for (const int i : free) fam.critical_labels.push_back(merged.nodes[static_cast<std::size_t>(i)].label());

    for (std::size_t s = 0; s < free.size(); ++s) {
        const auto orbit = orbit_nodes(merged, free[s]);
        const std::string c = "c" + std::to_string(s + 1);
        OrbitEquation eq;
        eq.source = static_cast<int>(s);
        bool done = false;
        for (std::size_t t = 1; t < orbit.size() && !done; ++t) {
            const int n = orbit[t];
            eq.steps = static_cast<int>(t);
            if (n == zero) {
                eq.target = OrbitEquation::Target::Zero;
                eq.text = iterate_text(c, eq.steps) + " = 0";
                done = true;
            } else if (n == inf) {
                eq.target = OrbitEquation::Target::Infinity;
                eq.text = iterate_text(c, eq.steps) + " = inf";
                done = true;
            } else if (const auto it = std::find(free.begin(), free.end(), n); it != free.end()) {
                eq.target = OrbitEquation::Target::Critical;
                eq.index = static_cast<int>(it - free.begin());
                eq.text = iterate_text(c, eq.steps) + " = c" + std::to_string(eq.index + 1);
                done = true;
            }
        }
        if (!done) {
            // The orbit closes on itself: R^len(c) = R^pre(c).
            const int last = merged.nodes[static_cast<std::size_t>(orbit.back())].next;
            const auto pre = std::find(orbit.begin(), orbit.end(), last) - orbit.begin();
            eq.target = OrbitEquation::Target::Iterate;
            eq.steps = static_cast<int>(orbit.size());
            eq.index = static_cast<int>(pre);
            eq.text = iterate_text(c, eq.steps) + " = " + iterate_text(c, eq.index);
        }
        fam.equations.push_back(eq);
    }

    for (int i = 0; i < fam.p_degree(); ++i) fam.unknowns.push_back("p" + std::to_string(i));
    for (int i = 1; i <= fam.q_degree(); ++i) fam.unknowns.push_back("q" + std::to_string(i));
    if (fam.unknowns.size() != free.size())
        throw Unsupported("build_family: " + std::to_string(fam.unknowns.size()) + " unknowns for " +
                          std::to_string(free.size()) + " relations\n" + describe(merged));
    fam.normalization = fam.zero_label + " at 0 (local degree " + std::to_string(fam.m0) + "), " + fam.infinity_label +
                        " at infinity (local degree " + std::to_string(fam.m_inf) + ")";
    if (!free.empty()) fam.normalization += ", " + fam.critical_labels.front() + " at 1";
    else fam.normalization += ", q0 = 1";
    return fam;
}

RationalMap MatingFamily::instantiate(std::span<const Complex> values) const {
    if (values.size() != unknowns.size()) throw std::invalid_argument("MatingFamily::instantiate: wrong value count");
    const int a = p_degree(), b = q_degree();
    CoeffList num(static_cast<std::size_t>(m0), Complex(0.0));
    for (int i = 0; i < a; ++i) num.push_back(values[static_cast<std::size_t>(i)]);
    num.push_back(1.0);
    CoeffList den(static_cast<std::size_t>(b + 1), Complex(0.0));
    for (int i = 1; i <= b; ++i) den[static_cast<std::size_t>(i)] = values[static_cast<std::size_t>(a + i - 1)];
    if (critical_labels.empty()) {
        den[0] = 1.0;
    } else {
        // W(1) = N'(1) Q(1) - N(1) Q'(1) = 0 is linear in q0.
        const Complex n1 = poly::eval(num, 1.0), dn1 = poly::eval(poly::derivative(num), 1.0);
        if (dn1 == Complex(0.0)) throw std::domain_error("MatingFamily::instantiate: N'(1) = 0");
        Complex s = 0.0, t = 0.0;
        for (int i = 1; i <= b; ++i) {
            s += den[static_cast<std::size_t>(i)];
            t += static_cast<double>(i) * den[static_cast<std::size_t>(i)];
        }
        den[0] = n1 * t / dn1 - s;
    }
    return RationalMap(std::move(num), std::move(den));
}

std::vector<Complex> MatingFamily::free_critical_points(const RationalMap& r) const {
    if (critical_labels.empty()) return {};
    if (critical_labels.size() == 1) return {Complex(1.0)};
    // W / z^(m0-1) is a quadratic with root 1; the other root is w0 / w2.
    const CoeffList& n = r.num();
    const CoeffList& d = r.den();
    const CoeffList w = poly::sub(poly::mul(poly::derivative(n), d), poly::mul(n, poly::derivative(d)));
    const auto lo = static_cast<std::size_t>(m0 - 1);
    if (w.size() < lo + 3 || w[lo + 2] == Complex(0.0))
        throw std::domain_error("MatingFamily: degenerate critical polynomial");
    return {Complex(1.0), w[lo] / w[lo + 2]};
}

std::string MatingFamily::describe() const {
    std::ostringstream os;
    os << "R(z) = z^" << m0 << " (";
    for (int i = 0; i < p_degree(); ++i) os << "p" << i << (i ? " z^" + std::to_string(i) : "") << " + ";
    os << "z^" << p_degree() << ") / (q0";
    for (int i = 1; i <= q_degree(); ++i) os << " + q" << i << " z" << (i > 1 ? "^" + std::to_string(i) : "");
    os << "), degree " << degree << "; " << normalization << "; unknowns {";
    for (std::size_t i = 0; i < unknowns.size(); ++i) os << (i ? ", " : "") << unknowns[i];
    os << "}";
    for (const auto& e : equations) os << "; " << e.text;
    return os.str();
}

std::vector<Complex> equation_residuals(const MatingFamily& fam, const RationalMap& r,
                                        std::span<const Complex> crit, bool relative) {
    std::vector<Complex> out;
    for (const auto& eq : fam.equations) {
        const int n = std::max(eq.steps, eq.target == OrbitEquation::Target::Iterate ? eq.index : 0);
        const auto orb = forward_orbit(r, crit[static_cast<std::size_t>(eq.source)], n);
        const SpherePoint& a = orb[static_cast<std::size_t>(eq.steps)];
        SpherePoint b;
        switch (eq.target) {
            case OrbitEquation::Target::Critical: b = crit[static_cast<std::size_t>(eq.index)]; break;
            case OrbitEquation::Target::Iterate: b = orb[static_cast<std::size_t>(eq.index)]; break;
            case OrbitEquation::Target::Zero: b = SpherePoint(0.0); break;
            case OrbitEquation::Target::Infinity: b = SpherePoint::infinity(); break;
        }
        const bool targeted = eq.target == OrbitEquation::Target::Zero || eq.target == OrbitEquation::Target::Infinity;
        // Compare in the chart where one of the two points is small.
        const bool near = a.is_finite() && b.is_finite() && (std::abs(a.value()) <= 1.0 || std::abs(b.value()) <= 1.0);
        const Complex x = near ? a.value() : a.inverted();
        const Complex y = near ? b.value() : b.inverted();
        Complex dxy = x - y;
        if (relative && !targeted) dxy /= std::max({std::abs(x), std::abs(y), 1e-300});
        out.push_back(dxy);
    }
    return out;
}

double RealizedMating::max_residual() const {
    double m = 0.0;
    for (const double r : residuals) m = std::max(m, r);
    return m;
}

// ---------------------------------------------------------------------------
// Solving

std::vector<std::vector<Complex>> realizer_seeds(std::size_t unknowns, const RealizeOptions& opts) {
    std::vector<std::vector<Complex>> seeds;
    if (unknowns == 0) return {{}};
    std::vector<Complex> axis;
    for (int i = 0; i < opts.per_axis; ++i)
        for (int j = 0; j < opts.per_axis; ++j) {
            const double h = opts.per_axis > 1 ? 2.0 * opts.box / (opts.per_axis - 1) : 0.0;
            axis.emplace_back(-opts.box + h * i, -opts.box + h * j);
        }
    std::vector<std::size_t> idx(unknowns, 0);
    while (true) {
        std::vector<Complex> s;
        for (const auto i : idx) s.push_back(axis[i]);
        seeds.push_back(std::move(s));
        std::size_t k = 0;
        while (k < unknowns && ++idx[k] == axis.size()) idx[k++] = 0;
        if (k == unknowns) break;
    }
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> u(-opts.box, opts.box);
    for (int r = 0; r < opts.random_seeds; ++r) {
        std::vector<Complex> s;
        for (std::size_t k = 0; k < unknowns; ++k) {
            const double re = u(rng);
            s.emplace_back(re, u(rng));
        }
        seeds.push_back(std::move(s));
    }
    return seeds;
}

namespace {

// Image of every merged node under the candidate map, seeded from the
// critical points and the two fixed ones.
std::optional<std::vector<SpherePoint>> node_points(const CriticalOrbitPortrait& merged, const MatingFamily& fam,
                                                    const RationalMap& r, std::span<const Complex> crit) {
    std::vector<std::optional<SpherePoint>> pts(merged.nodes.size());
    for (std::size_t i = 0; i < merged.nodes.size(); ++i) {
        const auto& l = merged.nodes[i].label();
        if (l == fam.zero_label) pts[i] = SpherePoint(0.0);
        if (l == fam.infinity_label) pts[i] = SpherePoint::infinity();
        for (std::size_t s = 0; s < fam.critical_labels.size(); ++s)
            if (l == fam.critical_labels[s]) pts[i] = SpherePoint(crit[s]);
    }
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const auto nx = static_cast<std::size_t>(merged.nodes[i].next);
            if (pts[i] && !pts[nx]) {
                pts[nx] = r(*pts[i]);
                changed = true;
            }
        }
    }
    std::vector<SpherePoint> out;
    for (const auto& p : pts) {
        if (!p) return std::nullopt;
        out.push_back(*p);
    }
    return out;
}

// One rotation per side (the root-of-unity freedom of the chart) must carry
// some source angle of every node onto a ray of R landing at the matched node.
bool external_angles_land(const MatingFamily& fam, const RealizedMating& rm, const std::vector<ExternalAngle>& ext) {
    try {
        const bool f_at_inf = fam.infinity_label.rfind("f.", 0) == 0;
        const BoettcherChart at0(rm.R, SpherePoint(0.0)), atinf(rm.R, SpherePoint::infinity());
        for (const char side : {'f', 'g'}) {
            const bool inf_side = (side == 'f') == f_at_inf;
            const BoettcherChart& chart = inf_side ? atinf : at0;
            const int m = inf_side ? fam.m_inf : fam.m0;
            bool some = false;
            for (int j = 0; j < m - 1 && !some; ++j) {
                bool all = true;
                for (const auto& e : ext) {
                    if (e.side != side) continue;
                    const auto hit = std::find_if(rm.portrait_match.begin(), rm.portrait_match.end(),
                                                  [&](const auto& pm) { return pm.first == e.label; });
                    if (hit == rm.portrait_match.end()) return false;
                    const SpherePoint& z = rm.portrait.nodes[static_cast<std::size_t>(hit->second)].point;
                    // R keeps one ray from this side even where the source has several.
                    all = std::any_of(e.angles.begin(), e.angles.end(), [&](const Angle& a) {
                        return ray_lands_at(chart, a.turns() + static_cast<double>(j) / (m - 1), z);
                    });
                    if (!all) break;
                }
                some = all;
            }
            if (!some) return false;
        }
        return true;
    } catch (const std::exception&) {
        return false;
    }
}

}  // namespace

RealizeReport realize(const CriticalOrbitPortrait& merged, const std::vector<std::vector<Complex>>& seeds,
                      const RealizeOptions& opts, const std::vector<ExternalAngle>& external) {
    RealizeReport rep;
    rep.external = external;
    rep.merged = merged;
    rep.family = build_family(merged);
    const MatingFamily& fam = rep.family;
    rep.seeds = static_cast<int>(seeds.size());

    auto residual = [&](const RealVector& v, bool relative) -> RealVector {
        try {
            const auto vals = unpack(v);
            const RationalMap r = fam.instantiate(vals);
            const auto crit = fam.free_critical_points(r);
            return pack(equation_residuals(fam, r, crit, relative));
        } catch (const std::exception&) {
            return RealVector::Constant(static_cast<Eigen::Index>(2 * fam.equations.size()),
                                        std::numeric_limits<double>::quiet_NaN());
        }
    };
    auto scaled = [&](const RealVector& v) { return residual(v, true); };
    auto absolute = [&](const RealVector& v) { return residual(v, false); };

    std::vector<NewtonResult> runs(seeds.size());
    if (fam.unknowns.empty()) {
        runs.assign(1, NewtonResult{.x = RealVector(0), .residual_norm = 0.0, .status = NewtonStatus::Converged});
    } else {
        parallel_for(seeds.size(), opts.threads, [&](std::size_t i) {
            try {
                runs[i] = newton_solve(scaled, pack(seeds[i]), NewtonOptions{.tol = opts.tol, .max_iter = 60});
                if (!runs[i].converged()) return;
                auto polished = newton_solve(absolute, runs[i].x, NewtonOptions{.tol = 1e-15, .max_iter = 6});
                const double before = absolute(runs[i].x).norm();
                if (polished.residual_norm < before) runs[i].x = polished.x;
                runs[i].residual_norm = std::min(before, polished.residual_norm);
                if (!(runs[i].residual_norm < opts.accept)) runs[i].status = NewtonStatus::MaxIterations;
            } catch (const std::exception& e) {
                runs[i].status = NewtonStatus::NonFinite;
                runs[i].residual_norm = std::numeric_limits<double>::infinity();
                runs[i].diagnostic = e.what();
            }
        });
    }

    std::vector<double> best;
    for (const auto& r : runs)
        if (std::isfinite(r.residual_norm)) best.push_back(r.residual_norm);
    std::sort(best.begin(), best.end());
    rep.best_residual = best.empty() ? std::numeric_limits<double>::infinity() : best.front();

    for (std::size_t i = 0; i < runs.size(); ++i) {
        if (!runs[i].converged()) continue;
        ++rep.converged_seeds;
        const auto vals = unpack(runs[i].x);
        const bool dup = std::any_of(rep.solutions.begin(), rep.solutions.end(), [&](const RealizedMating& s) {
            double d = 0;
            for (std::size_t k = 0; k < vals.size(); ++k) d = std::max(d, std::abs(vals[k] - s.params[k]));
            return d < opts.dedup;
        });
        if (dup) continue;
        auto note = [&](const std::string& why) {
            std::ostringstream os;
            os.precision(12);
            os << "seed " << i << " -> (";
            for (std::size_t k = 0; k < vals.size(); ++k) os << (k ? ", " : "") << vals[k];
            os << ") filtered: " << why;
            if (std::find(rep.notes.begin(), rep.notes.end(), os.str()) == rep.notes.end()) rep.notes.push_back(os.str());
        };
        try {
            RealizedMating rm;
            rm.params = vals;
            rm.R = fam.instantiate(vals);
            rm.critical = fam.free_critical_points(rm.R);
            rm.normalization = fam.normalization;
            rm.seed_index = static_cast<int>(i);
            for (const auto& d : equation_residuals(fam, rm.R, rm.critical)) rm.residuals.push_back(std::abs(d));
            if (rm.R.degree() != fam.degree || has_common_root(rm.R)) {
                note("degenerate map (degree drops or numerator and denominator share a root)");
                continue;
            }
            const auto pts = node_points(merged, fam, rm.R, rm.critical);
            if (!pts) {
                note("portrait nodes not reached from the critical points");
                continue;
            }
            double sep = 1.0;
            for (std::size_t a = 0; a < pts->size(); ++a)
                for (std::size_t b = a + 1; b < pts->size(); ++b) sep = std::min(sep, chordal_distance((*pts)[a], (*pts)[b]));
            if (sep < opts.margin) {
                note("distinct portrait nodes collide (an inequation fails)");
                continue;
            }
            rm.portrait = portrait_of(rm.R);
            bool matched = true;
            for (std::size_t a = 0; a < pts->size() && matched; ++a) {
                std::optional<int> hit;
                for (std::size_t b = 0; b < rm.portrait.nodes.size(); ++b)
                    if (chordal_distance((*pts)[a], rm.portrait.nodes[b].point) < 1e-7) hit = static_cast<int>(b);
                if (!hit || rm.portrait.nodes[static_cast<std::size_t>(*hit)].local_degree != merged.nodes[a].local_degree)
                    matched = false;
                else
                    rm.portrait_match.emplace_back(merged.nodes[a].label(), *hit);
            }
            if (!matched || !isomorphic(merged, rm.portrait)) {
                note("portrait of R differs from the merged portrait");
                continue;
            }
            if (!external.empty()) {
                rm.external_angles_match = external_angles_land(fam, rm, external);
                if (!rep.primary && rm.external_angles_match) rep.primary = rep.solutions.size();
            }
            rep.solutions.push_back(std::move(rm));
        } catch (const std::exception& e) {
            note(e.what());
        }
    }
    if (!rep.solutions.empty() && !rep.primary) {
        rep.primary = 0;
        if (!external.empty()) rep.notes.push_back("no solution matched the external angles; primary is the first");
    }
    if (rep.solutions.empty()) {
        std::string msg = "realize: no admissible solution (" + std::to_string(rep.converged_seeds) + " of " +
                          std::to_string(rep.seeds) + " seeds converged)";
        for (std::size_t i = 0; i < std::min<std::size_t>(rep.notes.size(), 5); ++i) msg += "\n  " + rep.notes[i];
        best.resize(std::min<std::size_t>(best.size(), 10));
        throw NoRealization(msg, best);
    }
    return rep;
}

RealizeReport realize(const MatingSpec& spec, const RealizeOptions& opts) {
    const auto merged = mated_portrait(spec);
    const auto fam = build_family(merged);
    return realize(merged, realizer_seeds(fam.unknown_count(), opts), opts, external_angles(spec, merged));
}

// ---------------------------------------------------------------------------
// Verification

namespace {

// 1 + order of vanishing of the Wronskian, in the chart where p is finite.
int measured_local_degree(const RationalMap& r, const SpherePoint& p) {
    const RationalMap m = p.is_infinity() ? r.inverted() : r;
    const Complex z = p.is_infinity() ? Complex(0.0) : p.value();
    const CoeffList& n = m.num();
    const CoeffList& d = m.den();
    CoeffList w = poly::sub(poly::mul(poly::derivative(n), d), poly::mul(n, poly::derivative(d)));
    double scale = 0.0;
    for (const auto& c : w) scale = std::max(scale, std::abs(c));
    const double tol = 1e-7 * scale * std::pow(std::max(1.0, std::abs(z)), static_cast<double>(w.size()));
    double fact = 1.0;
    for (int k = 0; !w.empty(); ++k) {
        if (std::abs(poly::eval(w, z)) / fact > tol) return k + 1;
        w = poly::derivative(w);
        fact *= k + 1;
    }
    return 1;
}

std::vector<int> critical_cycle_periods(const CriticalOrbitPortrait& p) {
    std::vector<int> seen(p.nodes.size(), 0), periods;
    for (const int c : p.critical_nodes()) {
        const auto sh = orbit_shape(p, c);
        if (sh.preperiod != 0) continue;
        const auto orb = orbit_nodes(p, c);
        if (std::any_of(orb.begin(), orb.end(), [&](int n) { return seen[static_cast<std::size_t>(n)]; })) continue;
        for (const int n : orb) seen[static_cast<std::size_t>(n)] = 1;
        periods.push_back(sh.period);
    }
    std::sort(periods.begin(), periods.end());
    return periods;
}

SpherePoint random_sphere_point(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    // Uniform on the sphere, through stereographic projection.
    const double h = 2.0 * u(rng) - 1.0;
    const double r = std::sqrt((1.0 + h) / std::max(1.0 - h, 1e-300));
    return SpherePoint(std::polar(r, kTwoPi * u(rng)));
}

}  // namespace

bool RealizationReport::degrees_ok() const {
    return std::all_of(local_degrees.begin(), local_degrees.end(),
                       [](const DegreeCheck& c) { return c.expected == c.measured; });
}

bool RealizationReport::ok() const {
    return preimage_failures == 0 && max_relation_residual < tol && degrees_ok() && portrait_isomorphic &&
           expected_cycles == found_cycles && basin_fraction >= 0.95 && perturbed_residual > 1e-4;
}

RealizationReport verify_realization(const RealizedMating& rm, const MatingFamily& fam,
                                     const CriticalOrbitPortrait& merged, double tol, std::uint64_t seed) {
    RealizationReport rep;
    rep.tol = tol;
    rep.degree = rm.R.degree();
    std::mt19937_64 rng(seed);

    rep.preimage_samples = 100;
    for (int s = 0; s < rep.preimage_samples; ++s) {
        const SpherePoint w = random_sphere_point(rng);
        const auto pre = preimage_roots(rm.R, w);
        int distinct = pre.at_infinity > 0 ? 1 : 0;
        bool simple = pre.at_infinity <= 1;
        for (const auto& root : pre.finite) {
            ++distinct;
            simple = simple && root.multiplicity == 1;
            rep.preimage_residual = std::max(rep.preimage_residual, chordal_distance(rm.R(root.z), w));
        }
        if (distinct != fam.degree || !simple) ++rep.preimage_failures;
    }

    for (const auto& d : equation_residuals(fam, rm.R, rm.critical))
        rep.max_relation_residual = std::max(rep.max_relation_residual, std::abs(d));

    for (const auto& [label, idx] : rm.portrait_match) {
        const auto mi = merged.find(label);
        if (!mi) continue;
        const auto& node = merged.nodes[static_cast<std::size_t>(*mi)];
        rep.local_degrees.push_back(DegreeCheck{
            label, node.local_degree,
            measured_local_degree(rm.R, rm.portrait.nodes[static_cast<std::size_t>(idx)].point)});
    }
    rep.portrait_isomorphic = isomorphic(merged, rm.portrait);

    rep.expected_cycles = critical_cycle_periods(merged);
    rep.found_cycles = critical_cycle_periods(rm.portrait);
    std::vector<SpherePoint> attractors;
    for (const int c : rm.portrait.critical_nodes())
        if (orbit_shape(rm.portrait, c).preperiod == 0)
            for (const int n : orbit_nodes(rm.portrait, c)) attractors.push_back(rm.portrait.nodes[static_cast<std::size_t>(n)].point);
    const int samples = 2048;
    int captured = 0;
    for (int s = 0; s < samples; ++s) {
        SpherePoint z = random_sphere_point(rng);
        for (int it = 0; it < 400; ++it) {
            if (std::any_of(attractors.begin(), attractors.end(),
                            [&](const SpherePoint& a) { return chordal_distance(z, a) < 1e-6; })) {
                ++captured;
                break;
            }
            z = rm.R(z);
        }
    }
    rep.basin_fraction = static_cast<double>(captured) / samples;

    // Negative control: nudge the constant of the denominator.
    CoeffList den = rm.R.den();
    den[0] += 1e-3;
    const RationalMap moved(rm.R.num(), den);
    std::vector<Complex> crit;
    const auto cps = critical_points(moved);
    for (const Complex c : rm.critical) {
        Complex best = c;
        double bd = std::numeric_limits<double>::infinity();
        for (const auto& cp : cps)
            if (cp.point.is_finite() && std::abs(cp.point.value() - c) < bd) {
                bd = std::abs(cp.point.value() - c);
                best = cp.point.value();
            }
        crit.push_back(best);
    }
    for (const auto& d : equation_residuals(fam, moved, crit))
        rep.perturbed_residual = std::max(rep.perturbed_residual, std::abs(d));
    if (fam.equations.empty()) {
        // No relations to break: the perturbation shows up in the fixed points instead.
        rep.perturbed_residual = chordal_distance(moved(SpherePoint(1.0)), rm.R(SpherePoint(1.0)));
    }
    return rep;
}

MarkedPoints mating_marked_points(const RealizedMating& rm, const CriticalOrbitPortrait& merged) {
    MarkedPoints out;
    for (std::size_t i = 0; i < merged.nodes.size(); ++i) {
        const auto& node = merged.nodes[i];
        const auto hit = std::find_if(rm.portrait_match.begin(), rm.portrait_match.end(),
                                      [&](const auto& pm) { return pm.first == node.label(); });
        if (hit == rm.portrait_match.end())
            throw std::invalid_argument("mating_marked_points: " + node.label() + " has no match in R");
        MarkedPoint x;
        x.label = node.label();
        x.z = rm.portrait.nodes[static_cast<std::size_t>(hit->second)].point;
        if (node.boundary_angle) x.t = node.boundary_angle->turns();
        x.origin = std::any_of(node.labels.begin(), node.labels.end(),
                               [](const std::string& l) { return l.rfind("f.", 0) == 0; })
                       ? 'f'
                       : 'g';
        x.periodic = orbit_shape(merged, static_cast<int>(i)).preperiod == 0;
        x.image = node.next;
        out.points.push_back(std::move(x));
    }
    return out;
}

}  // namespace jm
