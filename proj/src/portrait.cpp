#include "jm/portrait.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include "jm/parallel.hpp"

namespace jm {

Angle Angle::of(long num, long den) {
    if (den <= 0) throw std::invalid_argument("Angle: denominator must be positive");
    num %= den;
    if (num < 0) num += den;
    const long g = std::gcd(num, den);
    return Angle{num / g, den / g};
}

std::string to_string(const Angle& a) { return std::to_string(a.num) + "/" + std::to_string(a.den); }

int CriticalOrbitPortrait::budget() const {
    int b = 0;
    for (const auto& n : nodes) b += n.local_degree - 1;
    return b;
}

std::optional<int> CriticalOrbitPortrait::marked() const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].marked) return static_cast<int>(i);
    return std::nullopt;
}

std::optional<int> CriticalOrbitPortrait::find(const std::string& label) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
        for (const auto& l : nodes[i].labels)
            if (l == label) return static_cast<int>(i);
    return std::nullopt;
}

std::vector<int> CriticalOrbitPortrait::critical_nodes() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].critical()) out.push_back(static_cast<int>(i));
    return out;
}

std::vector<int> orbit_nodes(const CriticalOrbitPortrait& p, int node) {
    std::vector<int> seq;
    std::vector<char> seen(p.nodes.size(), 0);
    for (int i = node; i >= 0 && !seen[static_cast<std::size_t>(i)]; i = p.nodes[static_cast<std::size_t>(i)].next) {
        seen[static_cast<std::size_t>(i)] = 1;
        seq.push_back(i);
    }
    return seq;
}

OrbitShape orbit_shape(const CriticalOrbitPortrait& p, int node) {
    const auto seq = orbit_nodes(p, node);
    const int last_next = p.nodes[static_cast<std::size_t>(seq.back())].next;
    const auto it = std::find(seq.begin(), seq.end(), last_next);
    if (it == seq.end()) throw std::logic_error("orbit_shape: orbit does not close");
    const int pre = static_cast<int>(it - seq.begin());
    return OrbitShape{pre, static_cast<int>(seq.size()) - pre};
}

std::string describe(const CriticalOrbitPortrait& p) {
    std::ostringstream os;
    for (const auto& n : p.nodes) {
        for (std::size_t j = 0; j < n.labels.size(); ++j) os << (j ? "=" : "") << n.labels[j];
        os << " [deg " << n.local_degree << (n.marked ? ", marked" : "");
        if (n.boundary_angle) os << ", angle " << to_string(*n.boundary_angle);
        os << "] -> " << (n.next >= 0 ? p.nodes[static_cast<std::size_t>(n.next)].label() : "?") << "\n";
    }
    return os.str();
}

bool isomorphic(const CriticalOrbitPortrait& a, const CriticalOrbitPortrait& b) {
    const std::size_t n = a.nodes.size();
    if (n != b.nodes.size()) return false;
    std::vector<int> fwd(n, -1), bwd(n, -1);
    auto compatible = [&](std::size_t i, std::size_t j) {
        return a.nodes[i].local_degree == b.nodes[j].local_degree && a.nodes[i].marked == b.nodes[j].marked;
    };
    // Assigns i -> j and follows the edges; returns the assignments made, or
    // nullopt on conflict (after undoing them).
    auto assign = [&](int i, int j) -> std::optional<std::vector<int>> {
        std::vector<int> made;
        while (true) {
            const auto ui = static_cast<std::size_t>(i);
            const auto uj = static_cast<std::size_t>(j);
            if (fwd[ui] == j && bwd[uj] == i) return made;
            if (fwd[ui] != -1 || bwd[uj] != -1 || !compatible(ui, uj)) {
                for (int m : made) {
                    bwd[static_cast<std::size_t>(fwd[static_cast<std::size_t>(m)])] = -1;
                    fwd[static_cast<std::size_t>(m)] = -1;
                }
                return std::nullopt;
            }
            fwd[ui] = j;
            bwd[uj] = i;
            made.push_back(i);
            i = a.nodes[ui].next;
            j = b.nodes[uj].next;
        }
    };
    std::function<bool(std::size_t)> search = [&](std::size_t i) -> bool {
        while (i < n && fwd[i] != -1) ++i;
        if (i == n) return true;
        for (std::size_t j = 0; j < n; ++j) {
            if (bwd[j] != -1) continue;
            auto made = assign(static_cast<int>(i), static_cast<int>(j));
            if (!made) continue;
            if (search(i + 1)) return true;
            for (int m : *made) {
                bwd[static_cast<std::size_t>(fwd[static_cast<std::size_t>(m)])] = -1;
                fwd[static_cast<std::size_t>(m)] = -1;
            }
        }
        return false;
    };
    return search(0);
}

CriticalOrbitPortrait portrait_of(const RationalMap& map, const PortraitOptions& opts) {
    CriticalOrbitPortrait p;
    p.map_degree = map.degree();
    auto find_node = [&](const SpherePoint& z) -> int {
        for (std::size_t i = 0; i < p.nodes.size(); ++i)
            if (chordal_distance(p.nodes[i].point, z) < opts.tol) return static_cast<int>(i);
        return -1;
    };

    int counter = 0;
    for (const auto& cp : critical_points(map)) {
        std::string label;
        const bool marked = opts.marked && chordal_distance(cp.point, *opts.marked) < opts.tol;
        if (marked)
            label = "m";
        else if (cp.point.is_infinity())
            label = "inf";
        else
            label = "c" + std::to_string(++counter);
        label = opts.prefix + label;

        int cur = find_node(cp.point);
        if (cur >= 0) {
            // Already met as an iterate of an earlier critical orbit.
            auto& node = p.nodes[static_cast<std::size_t>(cur)];
            node.labels.insert(node.labels.begin(), label);
            node.local_degree = cp.local_degree;
            node.marked = node.marked || marked;
            continue;
        }
        p.nodes.push_back(PortraitNode{{label}, cp.point, cp.local_degree, marked, -1, std::nullopt});
        cur = static_cast<int>(p.nodes.size()) - 1;

        bool closed = false;
        for (int step = 1; step <= opts.max_steps; ++step) {
            const SpherePoint w = map(p.nodes[static_cast<std::size_t>(cur)].point);
            const int hit = find_node(w);
            if (hit >= 0) {
                p.nodes[static_cast<std::size_t>(cur)].next = hit;
                closed = true;
                break;
            }
            p.nodes.push_back(PortraitNode{{label + "^" + std::to_string(step)}, w, 1, false, -1, std::nullopt});
            const int nxt = static_cast<int>(p.nodes.size()) - 1;
            p.nodes[static_cast<std::size_t>(cur)].next = nxt;
            cur = nxt;
        }
        if (!closed)
            throw NotPostcriticallyFinite("portrait_of: orbit of " + label + " did not close within " +
                                              std::to_string(opts.max_steps) + " steps",
                                          opts.max_steps);
    }

    // Confirmation: every cycle must return to itself one period later when
    // iterated from the actual point, with some room for repelling multipliers.
    const double confirm_tol = std::max(1e3 * opts.tol, 1e-9);
    for (std::size_t i = 0; i < p.nodes.size(); ++i) {
        const OrbitShape s = orbit_shape(p, static_cast<int>(i));
        if (s.preperiod != 0) continue;
        SpherePoint w = p.nodes[i].point;
        for (int k = 0; k < s.period; ++k) w = map(w);
        if (chordal_distance(w, p.nodes[i].point) > confirm_tol)
            throw NotPostcriticallyFinite("portrait_of: cycle through " + p.nodes[i].label() + " not confirmed",
                                          opts.max_steps);
        // A cycle without critical points must repel; otherwise the orbit only
        // converges to it.
        double mult = 1.0;
        bool has_critical = false, has_infinity = false;
        int j = static_cast<int>(i);
        for (int k = 0; k < s.period; ++k) {
            const auto& node = p.nodes[static_cast<std::size_t>(j)];
            has_critical = has_critical || node.critical();
            has_infinity = has_infinity || node.point.is_infinity();
            if (node.point.is_finite()) mult *= std::abs(map.derivative(node.point.value()));
            j = node.next;
        }
        if (!has_critical && !has_infinity && mult <= 1.0)
            throw NotPostcriticallyFinite("portrait_of: orbit converges to a non-critical cycle through " +
                                              p.nodes[i].label() + " with multiplier " + std::to_string(mult),
                                          opts.max_steps);
    }

    p.min_separation = 1.0;
    for (std::size_t i = 0; i < p.nodes.size(); ++i)
        for (std::size_t j = i + 1; j < p.nodes.size(); ++j)
            p.min_separation = std::min(p.min_separation, chordal_distance(p.nodes[i].point, p.nodes[j].point));
    return p;
}

// ---------------------------------------------------------------------------
// Relations

namespace {

struct Term {
    std::string map_symbol;  // empty for a bare point
    std::string point;
    int iterate = 0;
};

class RelationScanner {
public:
    explicit RelationScanner(const std::string& s) : s_(s) {}

    [[noreturn]] void fail(const std::string& msg) const {
        throw std::invalid_argument("relation '" + s_ + "': " + msg + " at column " + std::to_string(pos_ + 1));
    }

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool done() {
        skip_ws();
        return pos_ >= s_.size();
    }
    bool accept(const std::string& tok) {
        skip_ws();
        if (s_.compare(pos_, tok.size(), tok) == 0) {
            pos_ += tok.size();
            return true;
        }
        return false;
    }
    void expect(const std::string& tok) {
        if (!accept(tok)) fail("expected '" + tok + "'");
    }
    std::string ident() {
        skip_ws();
        const std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
        if (start == pos_ || std::isdigit(static_cast<unsigned char>(s_[start]))) {
            pos_ = start;
            fail("expected a name");
        }
        return s_.substr(start, pos_ - start);
    }
    int number() {
        skip_ws();
        const std::size_t start = pos_;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        if (start == pos_) fail("expected an iterate count");
        return std::stoi(s_.substr(start, pos_ - start));
    }

    Term term() {
        Term t;
        const std::string name = ident();
        if (accept("^")) {
            const bool brace = accept("{");
            t.iterate = number();
            if (brace) expect("}");
            t.map_symbol = name;
            expect("(");
            t.point = ident();
            expect(")");
        } else if (accept("(")) {
            t.map_symbol = name;
            t.iterate = 1;
            t.point = ident();
            expect(")");
        } else {
            t.point = name;
        }
        return t;
    }

    // 0 for '=', 1 for '!=' or the unicode sign, -1 otherwise
    int op() {
        if (accept("!=") || accept("≠")) return 1;
        if (accept("=")) return 0;
        return -1;
    }

private:
    const std::string& s_;
    std::size_t pos_ = 0;
};

}  // namespace

OrbitShape OrbitRelation::shape() const {
    const int hi = std::max(lhs, rhs), lo = std::min(lhs, rhs);
    return OrbitShape{lo, hi - lo};
}

OrbitRelation parse_relation(const std::string& text) {
    RelationScanner sc(text);
    std::vector<Term> terms{sc.term()};
    std::vector<int> ops;
    while (!sc.done()) {
        const int o = sc.op();
        if (o < 0) sc.fail("expected '=' or '!='");
        ops.push_back(o);
        terms.push_back(sc.term());
    }
    if (std::count(ops.begin(), ops.end(), 0) != 1) sc.fail("need exactly one '='");

    OrbitRelation r;
    r.text = text;
    for (const auto& t : terms) {
        if (!t.map_symbol.empty()) {
            if (!r.map_symbol.empty() && r.map_symbol != t.map_symbol)
                throw std::invalid_argument("relation '" + text + "': mixes map symbols");
            r.map_symbol = t.map_symbol;
        }
        if (!r.point.empty() && r.point != t.point)
            throw std::invalid_argument("relation '" + text + "': mixes points");
        r.point = t.point;
    }
    for (std::size_t i = 0; i < ops.size(); ++i) {
        if (ops[i] == 0) {
            r.lhs = terms[i].iterate;
            r.rhs = terms[i + 1].iterate;
        } else {
            r.inequations.emplace_back(terms[i].iterate, terms[i + 1].iterate);
        }
    }
    if (r.lhs == r.rhs) throw std::invalid_argument("relation '" + text + "': trivial equation");
    return r;
}

// ---------------------------------------------------------------------------
// Families

namespace {

double parse_real(const std::string& s) {
    const auto slash = s.find('/');
    std::size_t used = 0;
    if (slash == std::string::npos) {
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument("bad number '" + s + "'");
        return v;
    }
    return parse_real(s.substr(0, slash)) / parse_real(s.substr(slash + 1));
}

}  // namespace

Complex parse_complex(std::string s) {
    if (s.empty()) throw std::invalid_argument("empty coefficient");
    if (s.back() != 'i') return {parse_real(s), 0.0};
    s.pop_back();
    // split at the last sign that is not at the front or after an exponent marker
    std::size_t split = std::string::npos;
    for (std::size_t i = s.size(); i-- > 1;)
        if ((s[i] == '+' || s[i] == '-') && s[i - 1] != 'e' && s[i - 1] != 'E') {
            split = i;
            break;
        }
    auto imag = [](const std::string& t) {
        if (t.empty() || t == "+") return 1.0;
        if (t == "-") return -1.0;
        return parse_real(t);
    };
    if (split == std::string::npos) return {0.0, imag(s)};
    return {parse_real(s.substr(0, split)), imag(s.substr(split))};
}

namespace {

struct CoeffTerm {
    int param = -1;  // -1 for a literal
    Complex value;   // literal, or the factor on the parameter
};

CoeffTerm parse_coeff(const std::string& raw, const std::vector<std::string>& params) {
    std::string s;
    for (char ch : raw)
        if (!std::isspace(static_cast<unsigned char>(ch))) s += ch;
    for (std::size_t p = 0; p < params.size(); ++p) {
        const auto& name = params[p];
        if (s.size() < name.size() || s.compare(s.size() - name.size(), name.size(), name) != 0) continue;
        std::string factor = s.substr(0, s.size() - name.size());
        if (!factor.empty() && factor.back() == '*') factor.pop_back();
        if (factor.empty() || factor == "+") return {static_cast<int>(p), 1.0};
        if (factor == "-") return {static_cast<int>(p), -1.0};
        return {static_cast<int>(p), parse_complex(factor)};
    }
    try {
        return {-1, parse_complex(s)};
    } catch (const std::exception&) {
        throw std::invalid_argument("coefficient '" + raw + "' is neither a number nor a parameter");
    }
}

CoeffList build(const std::vector<std::string>& recipe, const std::vector<std::string>& params,
                std::span<const Complex> values) {
    CoeffList out;
    out.reserve(recipe.size());
    for (const auto& r : recipe) {
        const CoeffTerm t = parse_coeff(r, params);
        out.push_back(t.param < 0 ? t.value : t.value * values[static_cast<std::size_t>(t.param)]);
    }
    return out;
}

}  // namespace

RationalMap FamilySpec::instantiate(std::span<const Complex> values) const {
    if (values.size() != params.size()) throw std::invalid_argument("FamilySpec: wrong parameter count");
    return RationalMap(build(num, params, values), build(den, params, values));
}

void FamilySpec::validate() const {
    if (params.size() != relations.size())
        throw std::invalid_argument("family '" + name + "': " + std::to_string(params.size()) + " parameters but " +
                                    std::to_string(relations.size()) + " relations");
    if (num.empty() || den.empty()) throw std::invalid_argument("family '" + name + "': empty coefficient list");
    for (const auto& c : num) parse_coeff(c, params);
    for (const auto& c : den) parse_coeff(c, params);
    for (const auto& r : relations) parse_relation(r);
}

std::vector<std::vector<Complex>> grid_seeds(double lo, double hi, int per_axis) {
    std::vector<std::vector<Complex>> out;
    const double step = per_axis > 1 ? (hi - lo) / (per_axis - 1) : 0.0;
    for (int i = 0; i < per_axis; ++i)
        for (int j = 0; j < per_axis; ++j) out.push_back({Complex(lo + i * step, lo + j * step)});
    return out;
}

Complex free_critical_point(const FamilySpec& spec, const RationalMap& map) {
    std::vector<SpherePoint> free;
    for (const auto& cp : critical_points(map)) {
        const bool pinned = std::any_of(spec.pinned.begin(), spec.pinned.end(),
                                        [&](const SpherePoint& q) { return chordal_distance(q, cp.point) < 1e-7; });
        if (!pinned) free.push_back(cp.point);
    }
    if (free.size() != 1 || free[0].is_infinity())
        throw std::domain_error("family '" + spec.name + "': expected one free finite critical point, found " +
                                std::to_string(free.size()));
    return free[0].value();
}

SolveReport solve_family(const FamilySpec& spec, const std::vector<std::vector<Complex>>& seeds,
                         const SolveOptions& opts) {
    spec.validate();
    std::vector<OrbitRelation> rels;
    for (const auto& r : spec.relations) rels.push_back(parse_relation(r));

    // Relative residuals drive Newton: the absolute ones also vanish as the
    // critical point collapses onto the marked center (a -> infinity here),
    // which swallows most grid seeds.
    auto relation_residual = [&](const RealVector& v, bool relative) -> RealVector {
        const auto vals = unpack(v);
        const RationalMap m = spec.instantiate(vals);
        const Complex c = free_critical_point(spec, m);
        std::vector<Complex> r;
        for (const auto& rel : rels) {
            const auto orb = forward_orbit(m, c, std::max(rel.lhs, rel.rhs));
            const auto& a = orb[static_cast<std::size_t>(rel.lhs)];
            const auto& b = orb[static_cast<std::size_t>(rel.rhs)];
            if (a.is_infinity() || b.is_infinity()) {
                r.emplace_back(std::numeric_limits<double>::quiet_NaN(), 0.0);
                continue;
            }
            const Complex d = a.value() - b.value();
            r.push_back(relative ? d / std::max({std::abs(a.value()), std::abs(b.value()), 1e-300}) : d);
        }
        return pack(r);
    };
    auto scaled = [&](const RealVector& v) { return relation_residual(v, true); };
    auto absolute = [&](const RealVector& v) { return relation_residual(v, false); };

    std::vector<NewtonResult> runs(seeds.size());
    parallel_for(seeds.size(), opts.threads, [&](std::size_t i) {
        try {
            runs[i] = newton_solve(scaled, pack(seeds[i]), NewtonOptions{.tol = opts.tol});
            if (!runs[i].converged()) return;
            // Polish on the absolute residual, which is what gets reported.
            auto polished = newton_solve(absolute, runs[i].x, NewtonOptions{.tol = 1e-15, .max_iter = 6});
            const double before = absolute(runs[i].x).norm();
            if (polished.residual_norm < before) runs[i].x = polished.x;
            runs[i].residual_norm = std::min(before, polished.residual_norm);
            if (!(runs[i].residual_norm < opts.tol)) {
                runs[i].status = NewtonStatus::MaxIterations;
                runs[i].diagnostic = "absolute residual above tolerance";
            }
        } catch (const std::exception& e) {
            runs[i].status = NewtonStatus::NonFinite;
            runs[i].residual_norm = std::numeric_limits<double>::infinity();
            runs[i].diagnostic = e.what();
        }
    });

    SolveReport rep;
    rep.best_residual = std::numeric_limits<double>::infinity();
    std::vector<double> best;
    for (const auto& r : runs)
        if (std::isfinite(r.residual_norm)) best.push_back(r.residual_norm);
    std::sort(best.begin(), best.end());
    if (!best.empty()) rep.best_residual = best.front();

    for (std::size_t i = 0; i < runs.size(); ++i) {
        const auto& run = runs[i];
        if (!run.converged()) continue;
        ++rep.converged_seeds;
        const auto vals = unpack(run.x);
        const bool dup = std::any_of(rep.solutions.begin(), rep.solutions.end(), [&](const FamilySolution& s) {
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
            if (std::find(rep.notes.begin(), rep.notes.end(), os.str()) == rep.notes.end())
                rep.notes.push_back(os.str());
        };
        try {
            FamilySolution s;
            s.params = vals;
            s.map = spec.instantiate(vals);
            s.residual = run.residual_norm;
            s.seed_index = static_cast<int>(i);
            if (has_common_root(s.map)) {
                note("numerator and denominator share a root");
                continue;
            }
            s.critical = free_critical_point(spec, s.map);
            s.portrait = portrait_of(s.map, PortraitOptions{.marked = spec.marked});
            std::optional<int> cnode;
            for (std::size_t n = 0; n < s.portrait.nodes.size() && !cnode; ++n) {
                const auto& node = s.portrait.nodes[n];
                if (node.critical() && node.point.is_finite() && std::abs(node.point.value() - s.critical) < 1e-7)
                    cnode = static_cast<int>(n);
            }
            if (!cnode) {
                note("free critical point missing from portrait");
                continue;
            }
            const auto orbit = orbit_nodes(s.portrait, *cnode);
            const auto marked = s.portrait.marked();
            if (marked && std::find(orbit.begin(), orbit.end(), *marked) != orbit.end()) {
                note("critical orbit absorbed into the marked basin");
                continue;
            }
            bool exact = true;
            for (const auto& rel : rels) exact = exact && orbit_shape(s.portrait, *cnode) == rel.shape();
            if (!exact) {
                note("orbit shape differs from the relation (an inequation fails)");
                continue;
            }
            // Inequations with the requested margin, and distance to the marked center.
            double sep = 1.0;
            for (std::size_t a = 0; a < orbit.size(); ++a) {
                const auto& pa = s.portrait.nodes[static_cast<std::size_t>(orbit[a])].point;
                for (std::size_t b = a + 1; b < orbit.size(); ++b)
                    sep = std::min(sep, chordal_distance(pa, s.portrait.nodes[static_cast<std::size_t>(orbit[b])].point));
                sep = std::min(sep, chordal_distance(pa, spec.marked));
            }
            if (sep <= opts.margin) {
                note("orbit points closer than the inequation margin");
                continue;
            }
            // The orbit is finite and ends on a confirmed cycle, so following it
            // once around is the whole forward orbit; raw long iteration would
            // drift off a repelling cycle.
            s.attracted_to_marked =
                attracted_to(s.map, s.critical, spec.marked, BasinTest{.max_iter = static_cast<int>(orbit.size())});
            s.on_boundary = on_basin_boundary(s.map, s.critical, spec.marked);
            rep.solutions.push_back(std::move(s));
        } catch (const std::exception& e) {
            note(e.what());
        }
    }
    if (rep.solutions.empty()) {
        std::string msg = "solve_family '" + spec.name + "': no admissible solution (" +
                          std::to_string(rep.converged_seeds) + " seeds converged)";
        for (std::size_t i = 0; i < std::min<std::size_t>(rep.notes.size(), 5); ++i) msg += "\n  " + rep.notes[i];
        throw NoSolution(msg, best);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Merging

CriticalOrbitPortrait merge_portraits(const CriticalOrbitPortrait& pf, const CriticalOrbitPortrait& pg, int d0,
                                      int k) {
    if (d0 < 2) throw std::invalid_argument("merge_portraits: d0 must be at least 2");
    if (k < 1 || k > std::max(1, d0 - 1)) throw std::invalid_argument("merge_portraits: gluing index out of range");
    for (const auto* p : {&pf, &pg}) {
        const auto m = p->marked();
        if (!m) throw std::invalid_argument("merge_portraits: portrait without a marked node");
        const auto& node = p->nodes[static_cast<std::size_t>(*m)];
        if (node.next != *m || node.local_degree != d0)
            throw std::invalid_argument("merge_portraits: marked node must be fixed with local degree d0");
        for (std::size_t i = 0; i < p->nodes.size(); ++i)
            if (static_cast<int>(i) != *m && p->nodes[i].next == *m)
                throw std::invalid_argument("merge_portraits: " + p->nodes[i].label() + " falls into the marked basin");
    }

    // Combined index space: f nodes then g nodes.
    const std::size_t nf = pf.nodes.size(), ng = pg.nodes.size();
    std::vector<std::size_t> parent(nf + ng);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> root = [&](std::size_t i) {
        return parent[i] == i ? i : parent[i] = root(parent[i]);
    };
    auto node_at = [&](std::size_t i) -> const PortraitNode& { return i < nf ? pf.nodes[i] : pg.nodes[i - nf]; };
    auto next_at = [&](std::size_t i) -> std::size_t {
        return i < nf ? static_cast<std::size_t>(pf.nodes[i].next) : nf + static_cast<std::size_t>(pg.nodes[i - nf].next);
    };

    const long dm1 = std::max(1, d0 - 1);
    for (std::size_t j = 0; j < ng; ++j) {
        const auto& gn = pg.nodes[j];
        if (!gn.boundary_angle || gn.marked) continue;
        const Angle target = Angle::of(k * gn.boundary_angle->den - gn.boundary_angle->num * dm1,
                                       dm1 * gn.boundary_angle->den);
        for (std::size_t i = 0; i < nf; ++i) {
            const auto& fn = pf.nodes[i];
            if (!fn.marked && fn.boundary_angle && *fn.boundary_angle == target) parent[root(nf + j)] = root(i);
        }
    }

    const auto mf = static_cast<std::size_t>(*pf.marked());
    const auto mg = nf + static_cast<std::size_t>(*pg.marked());
    std::vector<int> index(nf + ng, -1);
    CriticalOrbitPortrait out;
    out.map_degree = pf.map_degree + pg.map_degree - d0;
    for (std::size_t i = 0; i < nf + ng; ++i) {
        if (i == mf || i == mg) continue;
        const std::size_t r = root(i);
        const auto& src = node_at(i);
        std::vector<std::string> labels;
        for (const auto& l : src.labels) labels.push_back((i < nf ? "f." : "g.") + l);
        if (index[r] < 0) {
            index[r] = static_cast<int>(out.nodes.size());
            out.nodes.push_back(PortraitNode{labels, src.point, src.local_degree, false, -1, src.boundary_angle});
            if (i >= nf && src.boundary_angle) {
                // Store the angle on the f side of the circle.
                const auto& a = *src.boundary_angle;
                out.nodes.back().boundary_angle = Angle::of(k * a.den - a.num * dm1, dm1 * a.den);
            }
        } else {
            auto& dst = out.nodes[static_cast<std::size_t>(index[r])];
            if (dst.critical() && src.critical())
                throw MalformedMerge("merge_portraits: " + dst.label() + " and " + src.label() +
                                         " are both critical on the glued circle",
                                     0, 0);
            dst.local_degree = std::max(dst.local_degree, src.local_degree);
            dst.labels.insert(dst.labels.end(), labels.begin(), labels.end());
        }
    }
    for (std::size_t i = 0; i < nf + ng; ++i) {
        if (i == mf || i == mg) continue;
        const int from = index[root(i)];
        const int to = index[root(next_at(i))];
        auto& nx = out.nodes[static_cast<std::size_t>(from)].next;
        if (nx >= 0 && nx != to)
            throw MalformedMerge("merge_portraits: identified nodes have non-identified images at " +
                                     out.nodes[static_cast<std::size_t>(from)].label(),
                                 0, 0);
        nx = to;
    }

    const int expected = 2 * out.map_degree - 2;
    if (out.budget() != expected)
        throw MalformedMerge("merge_portraits: budget " + std::to_string(out.budget()) + ", expected " +
                                 std::to_string(expected),
                             out.budget(), expected);
    return out;
}

}  // namespace jm
