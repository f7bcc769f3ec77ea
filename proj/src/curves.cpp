#include "jm/curves.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "jm/boettcher.hpp"
#include "jm/parallel.hpp"

namespace jm {

namespace {

double wrap_turns(double t) {
    t = std::fmod(t, 1.0);
    return t < 0 ? t + 1.0 : t;
}

double cross(Complex a, Complex b) { return a.real() * b.imag() - a.imag() * b.real(); }

double segment_distance(Complex a, Complex b, Complex z) {
    const Complex ab = b - a;
    const double len2 = std::norm(ab);
    double u = len2 > 0 ? std::real((z - a) * std::conj(ab)) / len2 : 0.0;
    u = std::clamp(u, 0.0, 1.0);
    return std::abs(a + u * ab - z);
}

}  // namespace

int winding_number(const std::vector<Complex>& poly, Complex z) {
    double turns = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i)
        turns += std::arg((poly[(i + 1) % poly.size()] - z) / (poly[i] - z));
    return static_cast<int>(std::lround(turns / kTwoPi));
}

double distance_to_polygon(const std::vector<Complex>& poly, Complex z) {
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < poly.size(); ++i) d = std::min(d, segment_distance(poly[i], poly[(i + 1) % poly.size()], z));
    return d;
}

// ---------------------------------------------------------------------------

Interface Interface::circle(int n) {
    if (n < 16) throw std::invalid_argument("Interface::circle: need at least 16 samples");
    std::vector<Complex> pts(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) pts[static_cast<std::size_t>(j)] = std::polar(1.0, kTwoPi * j / n);
    return Interface(std::move(pts), 0.0);
}

Interface::Interface(std::vector<Complex> samples, Complex center) : pts_(std::move(samples)), center_(center) {
    if (pts_.size() < 3) throw std::invalid_argument("Interface: need at least 3 samples");
    if (winding_number(pts_, center_) != 1)
        throw std::invalid_argument("Interface: samples must wind once counterclockwise around the center");
    lo_ = hi_ = pts_.front();
    for (const auto& p : pts_) {
        lo_ = {std::min(lo_.real(), p.real()), std::min(lo_.imag(), p.imag())};
        hi_ = {std::max(hi_.real(), p.real()), std::max(hi_.imag(), p.imag())};
    }
    grid_ = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(pts_.size())) / 2));
    buckets_.assign(static_cast<std::size_t>(grid_ * grid_), {});
    for (std::size_t i = 0; i < pts_.size(); ++i)
        for (const std::size_t c : cells_near(pts_[i], pts_[(i + 1) % pts_.size()])) buckets_[c].push_back(i);
}

std::vector<std::size_t> Interface::cells_near(Complex a, Complex b) const {
    const double w = std::max(hi_.real() - lo_.real(), 1e-300), h = std::max(hi_.imag() - lo_.imag(), 1e-300);
    auto cell = [&](double v, double lo, double span) {
        return std::clamp(static_cast<int>(std::floor((v - lo) / span * grid_)), 0, grid_ - 1);
    };
    const double x0 = std::min(a.real(), b.real()), x1 = std::max(a.real(), b.real());
    const double y0 = std::min(a.imag(), b.imag()), y1 = std::max(a.imag(), b.imag());
    std::vector<std::size_t> out;
    if (x1 < lo_.real() || x0 > hi_.real() || y1 < lo_.imag() || y0 > hi_.imag()) return out;
    const int i0 = cell(x0, lo_.real(), w), i1 = cell(x1, lo_.real(), w);
    const int j0 = cell(y0, lo_.imag(), h), j1 = cell(y1, lo_.imag(), h);
    for (int i = i0; i <= i1; ++i)
        for (int j = j0; j <= j1; ++j) out.push_back(static_cast<std::size_t>(i * grid_ + j));
    return out;
}

Complex Interface::at(double t) const {
    const double x = wrap_turns(t) * static_cast<double>(pts_.size());
    const auto k = std::min(static_cast<std::size_t>(x), pts_.size() - 1);
    const double u = x - static_cast<double>(k);
    return pts_[k] + u * (pts_[(k + 1) % pts_.size()] - pts_[k]);
}

bool Interface::inside(Complex z) const { return point_in_polygon(pts_, z); }

double Interface::distance(Complex z) const { return distance_to_polygon(pts_, z); }

std::vector<Interface::Crossing> Interface::crossings(Complex a, Complex b) const {
    std::vector<std::size_t> edges;
    for (const std::size_t c : cells_near(a, b)) edges.insert(edges.end(), buckets_[c].begin(), buckets_[c].end());
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    const double n = static_cast<double>(pts_.size());
    std::vector<Crossing> out;
    const Complex d = b - a;
    for (const std::size_t i : edges) {
        const Complex p = pts_[i], e = pts_[(i + 1) % pts_.size()] - p;
        const double den = cross(d, e);
        if (den == 0.0) continue;
        const double s = cross(p - a, e) / den;
        const double u = cross(p - a, d) / den;
        if (s < 0.0 || s > 1.0 || u < 0.0 || u >= 1.0) continue;
        out.push_back({s, wrap_turns((static_cast<double>(i) + u) / n), a + s * d});
    }
    std::sort(out.begin(), out.end(), [](const Crossing& x, const Crossing& y) { return x.s < y.s; });
    return out;
}

std::vector<Complex> Interface::arc(double t0, double t1) const {
    const double len = wrap_turns(t1 - t0);
    const std::size_t n = pts_.size();
    std::vector<Complex> out;
    auto j = (static_cast<std::size_t>(std::floor(wrap_turns(t0) * static_cast<double>(n))) + 1) % n;
    for (std::size_t k = 0; k <= n; ++k, j = (j + 1) % n) {
        const double off = wrap_turns(static_cast<double>(j) / static_cast<double>(n) - t0);
        if (off <= 1e-15 || off > 1.0 - 1e-15) continue;
        if (off >= len - 1e-15) break;
        out.push_back(pts_[j]);
    }
    return out;
}

// ---------------------------------------------------------------------------

bool TypedSegment::chord_contains(double t) const {
    return wrap_turns(t - chord_from) <= wrap_turns(chord_to - chord_from) + 1e-12;
}

Segmentation segment_curve(const PolygonalCurve& curve, const Interface& T) {
    Segmentation out;
    std::vector<Complex> v = curve.vertices;
    if (v.size() < 3) throw std::invalid_argument("segment_curve: need at least 3 vertices");
    for (auto& p : v) {
        if (T.distance(p) >= 1e-10) continue;
        const Complex r = p - T.center();
        p += 1e-9 * (r / std::abs(r));
        ++out.perturbed;
    }

    struct Hit {
        std::size_t edge;
        Interface::Crossing c;
    };
    std::vector<Hit> hits;
    for (std::size_t i = 0; i < v.size(); ++i)
        for (const auto& c : T.crossings(v[i], v[(i + 1) % v.size()])) hits.push_back({i, c});
    if (hits.empty()) return out;
    if (hits.size() % 2 != 0) throw AmbiguousMembership("segment_curve: odd number of crossings with T");

    const Complex center = T.center();
    for (std::size_t h = 0; h < hits.size(); ++h) {
        const Hit& a = hits[h];
        const Hit& b = hits[(h + 1) % hits.size()];
        TypedSegment seg;
        seg.arc.push_back(a.c.point);
        // Vertices after a's edge up to and including b's edge start.
        if (!(a.edge == b.edge && b.c.s > a.c.s && h + 1 < hits.size())) {
            std::size_t i = (a.edge + 1) % v.size();
            while (true) {
                seg.arc.push_back(v[i]);
                if (i == b.edge) break;
                i = (i + 1) % v.size();
            }
        }
        seg.arc.push_back(b.c.point);
        const Complex probe = 0.5 * (seg.arc[0] + seg.arc[1]);
        seg.side = T.inside(probe) ? TypedSegment::Side::R : TypedSegment::Side::P;
        seg.t_start = a.c.t;
        seg.t_end = b.c.t;

        // Return along T counterclockwise (I = ccw arc end -> start) or
        // clockwise (I = ccw arc start -> end); keep the loop with winding 0.
        std::vector<Complex> ccw = seg.arc, cw = seg.arc;
        for (const auto& p : T.arc(seg.t_end, seg.t_start)) ccw.push_back(p);
        auto back = T.arc(seg.t_start, seg.t_end);
        std::reverse(back.begin(), back.end());
        for (const auto& p : back) cw.push_back(p);
        if (winding_number(ccw, center) == 0) {
            seg.chord_from = seg.t_end;
            seg.chord_to = seg.t_start;
            seg.region = std::move(ccw);
        } else {
            seg.chord_from = seg.t_start;
            seg.chord_to = seg.t_end;
            seg.region = std::move(cw);
        }
        if (seg.side == TypedSegment::Side::P) ++out.K;
        out.segments.push_back(std::move(seg));
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<int> MarkedPoints::P_f() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < points.size(); ++i)
        if (points[i].origin == 'f') out.push_back(static_cast<int>(i));
    return out;
}

std::vector<int> MarkedPoints::P_g() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < points.size(); ++i)
        if (points[i].origin == 'g') out.push_back(static_cast<int>(i));
    return out;
}

std::vector<int> MarkedPoints::O() const {
    std::vector<int> out;
    for (const int i : P_f())
        if (points[static_cast<std::size_t>(i)].periodic) out.push_back(i);
    return out;
}

bool region_contains(const TypedSegment& seg, const MarkedPoint& x) {
    if (x.z.is_infinity()) return false;
    if (x.t) {
        for (const double e : {seg.chord_from, seg.chord_to}) {
            const double d = wrap_turns(*x.t - e);
            if (std::min(d, 1.0 - d) < 1e-9) throw AmbiguousMembership("region_contains: " + x.label + " is an endpoint of I");
        }
        return seg.chord_contains(*x.t);
    }
    const Complex z = x.z.value();
    if (distance_to_polygon(seg.region, z) < 1e-9)
        throw AmbiguousMembership("region_contains: " + x.label + " lies on a region boundary");
    return winding_number(seg.region, z) != 0;
}

bool region_contains_raycast(const TypedSegment& seg, Complex z) { return point_in_polygon(seg.region, z); }

int count_N(const MarkedPoint& x, const Segmentation& seg) {
    int n = 0;
    for (const auto& s : seg.segments)
        if (s.side == TypedSegment::Side::P && region_contains(s, x)) ++n;
    return n;
}

std::string to_string(CurveClass::Tag tag) {
    switch (tag) {
        case CurveClass::Tag::Sigma: return "Sigma";
        case CurveClass::Tag::Pi: return "Pi";
        case CurveClass::Tag::Lambda: break;
    }
    return "Lambda";
}

bool is_peripheral(const PolygonalCurve& curve, const MarkedPoints& marked) {
    int in = 0, out = 0;
    for (const auto& x : marked.points) {
        if (x.z.is_infinity()) {
            ++out;
            continue;
        }
        if (distance_to_polygon(curve.vertices, x.z.value()) < 1e-9)
            throw AmbiguousMembership("is_peripheral: curve passes through " + x.label);
        (winding_number(curve.vertices, x.z.value()) != 0 ? in : out)++;
    }
    return in <= 1 || out <= 1;
}

CurveClass classify_curve(const Segmentation& seg, const PolygonalCurve& curve, const MarkedPoints& marked) {
    CurveClass c;
    c.K = seg.K;
    c.peripheral = is_peripheral(curve, marked);
    c.N.assign(marked.points.size(), 0);
    bool any = false, periodic = false;
    for (const int i : marked.P_f()) {
        const int n = count_N(marked.points[static_cast<std::size_t>(i)], seg);
        c.N[static_cast<std::size_t>(i)] = n;
        any = any || n > 0;
        periodic = periodic || (n > 0 && marked.points[static_cast<std::size_t>(i)].periodic);
    }
    c.tag = periodic ? CurveClass::Tag::Sigma : (any ? CurveClass::Tag::Pi : CurveClass::Tag::Lambda);
    return c;
}

CurveClass classify_curve(const PolygonalCurve& curve, const Interface& T, const MarkedPoints& marked) {
    return classify_curve(segment_curve(curve, T), curve, marked);
}

// ---------------------------------------------------------------------------
// Path lifting

namespace {

struct Lifter {
    const RationalMap& map;
    std::vector<Complex> critical;
    double max_step;

    Complex value(Complex z) const { return poly::eval(map.num(), z) / poly::eval(map.den(), z); }

    double critical_distance(Complex z) const {
        double d = std::numeric_limits<double>::infinity();
        for (const auto& c : critical) d = std::min(d, std::abs(z - c));
        return d;
    }

    // Continues the lift z of w0 along [w0, w1]; appends the accepted
    // points, the last one over w1.
    void step(Complex& z, Complex w0, Complex w1, std::vector<Complex>& out) const {
        double s = 0.0, ds = 1.0;
        Complex w = w0;
        while (s < 1.0) {
            const double s1 = std::min(1.0, s + ds);
            const Complex target = w0 + s1 * (w1 - w0);
            const Complex pred = z + (target - w) / map.derivative(z);
            Complex x = pred;
            bool ok = false;
            for (int it = 0; it < 30 && std::isfinite(std::abs(x)); ++it) {
                const Complex dx = (value(x) - target) / map.derivative(x);
                x -= dx;
                if (std::abs(dx) <= 1e-15 * (1.0 + std::abs(x))) break;
            }
            if (std::isfinite(std::abs(x))) {
                const double move = std::abs(x - z);
                ok = std::abs(value(x) - target) <= 1e-11 * (1.0 + std::abs(target)) && move <= max_step &&
                     move <= 0.3 * critical_distance(z) && std::abs(x - pred) <= 0.1 * move + 1e-13;
            }
            if (ok) {
                z = x;
                w = target;
                s = s1;
                out.push_back(z);
                ds = std::min(2.0 * ds, 1.0);
            } else {
                ds *= 0.5;
                if (ds < 1e-12) throw LiftAmbiguous("pullback_curve: lift stalls near a critical point");
            }
        }
    }
};

std::vector<Complex> finite_critical(const RationalMap& map) {
    std::vector<Complex> out;
    for (const auto& c : critical_points(map))
        if (c.point.is_finite()) out.push_back(c.point.value());
    return out;
}

double diameter(const std::vector<Complex>& v) {
    Complex lo = v.front(), hi = v.front();
    for (const auto& p : v) {
        lo = {std::min(lo.real(), p.real()), std::min(lo.imag(), p.imag())};
        hi = {std::max(hi.real(), p.real()), std::max(hi.imag(), p.imag())};
    }
    return std::abs(hi - lo);
}

std::vector<Complex> resample(const std::vector<Complex>& v, double h) {
    std::vector<Complex> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const Complex a = v[i], b = v[(i + 1) % v.size()];
        const int k = std::max(1, static_cast<int>(std::ceil(std::abs(b - a) / h)));
        for (int j = 0; j < k; ++j) out.push_back(a + (static_cast<double>(j) / k) * (b - a));
    }
    return out;
}

}  // namespace

std::vector<LiftComponent> pullback_curve(const RationalMap& map, const PolygonalCurve& curve,
                                          const PullbackOptions& opts) {
    if (curve.vertices.size() < 3) throw std::invalid_argument("pullback_curve: need at least 3 vertices");
    const double diam = diameter(curve.vertices);
    std::vector<Complex> base = resample(curve.vertices, opts.max_step > 0 ? opts.max_step : diam / 256.0);

    // Critical values closer than 1e-6 push the sample away.
    std::vector<Complex> cvals;
    for (const auto& c : critical_points(map)) {
        const SpherePoint v = map(c.point);
        if (v.is_finite()) cvals.push_back(v.value());
    }
    for (auto& w : base)
        for (const auto& c : cvals)
            if (std::abs(w - c) < 1e-6) w = c + 2e-6 * (w == c ? Complex(1.0) : (w - c) / std::abs(w - c));

    const Lifter lift{map, finite_critical(map), opts.max_lift_step > 0 ? opts.max_lift_step : diam / 256.0};
    std::vector<Complex> starts;
    for (const auto& p : preimages(map, base.front())) {
        if (p.is_infinity()) throw LiftAmbiguous("pullback_curve: a preimage of the curve is infinity");
        starts.push_back(p.value());
    }
    for (std::size_t i = 0; i < starts.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (std::abs(starts[i] - starts[j]) < 1e-7) throw LiftAmbiguous("pullback_curve: preimages collide");

    const std::size_t D = starts.size();
    std::vector<std::vector<Complex>> lifts(D);
    std::vector<std::vector<std::size_t>> at_sample(D);  // index into lifts[i] of each base sample
    for (std::size_t i = 0; i < D; ++i) {
        Complex z = starts[i];
        lifts[i].push_back(z);
        at_sample[i].push_back(0);
        for (std::size_t k = 0; k < base.size(); ++k) {
            lift.step(z, base[k], base[(k + 1) % base.size()], lifts[i]);
            at_sample[i].push_back(lifts[i].size() - 1);
        }
    }
    for (std::size_t k = 0; k < base.size(); ++k)
        for (std::size_t i = 0; i < D; ++i)
            for (std::size_t j = 0; j < i; ++j)
                if (std::abs(lifts[i][at_sample[i][k]] - lifts[j][at_sample[j][k]]) < 1e-7)
                    throw LiftAmbiguous("pullback_curve: two lifts meet");

    std::vector<int> perm(D, -1);
    for (std::size_t i = 0; i < D; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < D; ++j)
            if (std::abs(lifts[i].back() - starts[j]) < std::abs(lifts[i].back() - starts[best])) best = j;
        if (std::abs(lifts[i].back() - starts[best]) > 1e-6 * (1.0 + std::abs(starts[best])))
            throw LiftAmbiguous("pullback_curve: lift does not close on a preimage");
        perm[i] = static_cast<int>(best);
    }
    std::vector<int> sorted = perm;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < D; ++i)
        if (sorted[i] != static_cast<int>(i)) throw LiftAmbiguous("pullback_curve: lifts do not permute the preimages");

    std::vector<LiftComponent> out;
    std::vector<bool> used(D, false);
    for (std::size_t i0 = 0; i0 < D; ++i0) {
        if (used[i0]) continue;
        LiftComponent comp;
        comp.multiplicity = 0;
        for (std::size_t i = i0; !used[i]; i = static_cast<std::size_t>(perm[i])) {
            used[i] = true;
            ++comp.multiplicity;
            comp.curve.vertices.insert(comp.curve.vertices.end(), lifts[i].begin(), lifts[i].end() - 1);
        }
        // Residual at the lifts of the base samples.
        for (std::size_t i = i0, pass = 0; pass < static_cast<std::size_t>(comp.multiplicity);
             i = static_cast<std::size_t>(perm[i]), ++pass)
            for (std::size_t k = 0; k < base.size(); ++k)
                comp.residual = std::max(comp.residual, std::abs(lift.value(lifts[i][at_sample[i][k]]) - base[k]) /
                                                            (1.0 + std::abs(base[k])));
        out.push_back(std::move(comp));
    }
    return out;
}

// ---------------------------------------------------------------------------

InterfaceFit invariant_interface(const RationalMap& map, int d0, const MarkedPoints& marked, int n, int max_iter,
                                 double tol) {
    if (d0 < 2) throw std::invalid_argument("invariant_interface: d0 must be at least 2");
    if (n < 16) throw std::invalid_argument("invariant_interface: need at least 16 samples");
    std::vector<std::pair<double, Complex>> anchors;
    for (const auto& x : marked.points)
        if (x.t && x.z.is_finite()) anchors.emplace_back(wrap_turns(*x.t), x.z.value());
    std::sort(anchors.begin(), anchors.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    // Start: log-polar interpolation through the points on T, angle
    // increasing between consecutive anchors.
    std::vector<Complex> h(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        const double t = static_cast<double>(j) / n;
        Complex z = std::polar(1.0, kTwoPi * t);
        if (anchors.size() == 1) {
            z = anchors[0].second * std::polar(1.0, kTwoPi * (t - anchors[0].first));
        } else if (anchors.size() > 1) {
            std::size_t b = 0;
            while (b < anchors.size() && anchors[b].first <= t) ++b;
            const auto& A = anchors[(b + anchors.size() - 1) % anchors.size()];
            const auto& B = anchors[b % anchors.size()];
            const double span = wrap_turns(B.first - A.first);
            const double u = span > 0 ? wrap_turns(t - A.first) / span : 0.0;
            double dphi = std::arg(B.second / A.second);
            if (dphi <= 0) dphi += kTwoPi;
            const double lr = std::log(std::abs(A.second)) + u * (std::log(std::abs(B.second)) - std::log(std::abs(A.second)));
            z = std::polar(std::exp(lr), std::arg(A.second) + u * dphi);
        }
        h[static_cast<std::size_t>(j)] = z;
    }

    InterfaceFit fit;
    const Lifter lift{map, finite_critical(map), diameter(h) / 512.0};
    std::vector<Complex> cvals;
    for (const auto& c : critical_points(map)) {
        const SpherePoint v = map(c.point);
        if (v.is_finite()) cvals.push_back(v.value());
    }
    const std::size_t N = h.size(), total = static_cast<std::size_t>(d0) * N;
    auto nearest_preimage = [&](Complex w, Complex guess) {
        Complex best{};
        double dist = std::numeric_limits<double>::infinity();
        for (const auto& p : preimages(map, w))
            if (p.is_finite() && std::abs(p.value() - guess) < dist) {
                dist = std::abs(p.value() - guess);
                best = p.value();
            }
        return best;
    };
    auto pin_anchors = [&](std::vector<Complex>& v) {
        for (const auto& [t, z] : anchors) {
            const double x = t * static_cast<double>(N);
            if (std::abs(x - std::round(x)) < 1e-9) v[static_cast<std::size_t>(std::lround(x)) % N] = z;
        }
    };
    pin_anchors(h);

    for (int it = 1; it <= max_iter; ++it) {
        // Samples of the d0-fold traversal sitting on critical values cut it
        // into pieces; each piece is lifted outward from its middle.
        std::vector<std::size_t> breaks;
        for (std::size_t k = 0; k < total; ++k)
            for (const auto& c : cvals)
                if (std::abs(h[k % N] - c) < 1e-9 * (1.0 + std::abs(c))) {
                    breaks.push_back(k);
                    break;
                }
        if (breaks.empty()) breaks.push_back(0);
        std::vector<Complex> next(N);
        std::vector<int> have(N, 0);
        auto record = [&](std::size_t k, Complex z) {
            if (k % static_cast<std::size_t>(d0) != 0) return;
            const std::size_t j = (k / static_cast<std::size_t>(d0)) % N;
            if (have[j] && std::abs(next[j] - z) > 1e-8 * (1.0 + std::abs(z)))
                throw LiftAmbiguous("invariant_interface: the lifted curve does not close up");
            next[j] = z;
            have[j] = 1;
        };
        std::vector<Complex> scratch;
        for (std::size_t q = 0; q < breaks.size(); ++q) {
            const std::size_t ka = breaks[q];
            const std::size_t kb = q + 1 < breaks.size() ? breaks[q + 1] : breaks[0] + total;
            const std::size_t km = ka + (kb - ka) / 2;
            const double tm = static_cast<double>(km) / static_cast<double>(total);
            const Complex guess = h[static_cast<std::size_t>(tm * static_cast<double>(N)) % N];
            Complex z = nearest_preimage(h[km % N], guess);
            const Complex zm = z;
            record(km, z);
            for (std::size_t k = km; k + 1 < kb; ++k) {
                lift.step(z, h[k % N], h[(k + 1) % N], scratch);
                record(k + 1, z);
            }
            if (kb > km) record(kb, nearest_preimage(h[kb % N], z));
            z = zm;
            for (std::size_t k = km; k > ka + 1; --k) {
                lift.step(z, h[k % N], h[(k - 1) % N], scratch);
                record(k - 1, z);
            }
            if (km > ka) record(ka, nearest_preimage(h[ka % N], z));
        }
        pin_anchors(next);
        fit.change = 0.0;
        for (std::size_t j = 0; j < N; ++j) fit.change = std::max(fit.change, std::abs(next[j] - h[j]));
        h = std::move(next);
        fit.iterations = it;
        if (fit.change < tol) {
            fit.converged = true;
            break;
        }
    }
    fit.T = Interface(h, 0.0);
    for (const auto& [t, z] : anchors) fit.marked_error = std::max(fit.marked_error, std::abs(fit.T.at(t) - z));
    return fit;
}

// ---------------------------------------------------------------------------
// Lemma harness

namespace {

const MarkedPoint& image_of(const MarkedPoints& m, int i) {
    const int j = m.points[static_cast<std::size_t>(i)].image;
    if (j < 0 || j >= static_cast<int>(m.points.size()))
        throw std::invalid_argument("run_lemma_harness: marked point without image");
    return m.points[static_cast<std::size_t>(j)];
}

int eventual_depth(const MarkedPoints& m) {
    int depth = 0;
    for (const int i : m.P_f()) {
        int k = 0, j = i;
        while (!m.points[static_cast<std::size_t>(j)].periodic && k <= static_cast<int>(m.points.size())) {
            j = m.points[static_cast<std::size_t>(j)].image;
            if (j < 0) break;
            ++k;
        }
        depth = std::max(depth, k);
    }
    return depth;
}

CurveHarnessRow harness_row(const RationalMap& map, const Interface& T, const MarkedPoints& marked,
                            const PolygonalCurve& gamma, int ev_depth) {
    CurveHarnessRow row;
    const Segmentation sg = segment_curve(gamma, T);
    row.cls = classify_curve(sg, gamma, marked);
    const auto pf = marked.P_f();
    row.oo_lhs.assign(pf.size(), 0);
    row.oo_rhs.assign(pf.size(), 0);
    for (std::size_t a = 0; a < pf.size(); ++a) row.oo_rhs[a] = count_N(image_of(marked, pf[a]), sg);

    const auto lifts = pullback_curve(map, gamma);
    row.components = static_cast<int>(lifts.size());
    for (const auto& l : lifts) {
        row.multiplicity_total += l.multiplicity;
        if (is_peripheral(l.curve, marked)) continue;
        ++row.nonperipheral;
        const Segmentation se = segment_curve(l.curve, T);
        for (const auto& s : se.segments) {
            if (s.side != TypedSegment::Side::P) continue;
            for (std::size_t i = 0; i < marked.points.size(); ++i) {
                if (!region_contains(s, marked.points[i])) continue;
                const MarkedPoint& y = image_of(marked, static_cast<int>(i));
                bool hit = false;
                for (const auto& tau : sg.segments)
                    hit = hit || (tau.side == TypedSegment::Side::P && region_contains(tau, y));
                row.ess_ok = row.ess_ok && hit;
            }
        }
        for (std::size_t a = 0; a < pf.size(); ++a)
            row.oo_lhs[a] += count_N(marked.points[static_cast<std::size_t>(pf[a])], se);
    }
    for (std::size_t a = 0; a < pf.size(); ++a) {
        if (row.oo_lhs[a] > row.oo_rhs[a]) ++row.oo_violations;
        if (row.oo_lhs[a] == row.oo_rhs[a] && row.oo_lhs[a] > 0) ++row.oo_equalities;
    }

    row.ev = "vacuous";
    if (!row.cls.peripheral && row.cls.tag == CurveClass::Tag::Pi && ev_depth > 0) {
        std::vector<PolygonalCurve> level{gamma};
        for (int d = 0; d < ev_depth && !level.empty(); ++d) {
            std::vector<PolygonalCurve> next;
            for (const auto& c : level)
                for (auto& l : pullback_curve(map, c))
                    if (!is_peripheral(l.curve, marked) && next.size() < 64) next.push_back(std::move(l.curve));
            level = std::move(next);
        }
        bool all_lambda = true;
        for (const auto& c : level)
            all_lambda = all_lambda && classify_curve(c, T, marked).tag == CurveClass::Tag::Lambda;
        row.ev = all_lambda ? "observed" : "unminimized";
    }
    return row;
}

}  // namespace

HarnessReport run_lemma_harness(const RationalMap& map, const Interface& T, const MarkedPoints& marked,
                                const std::vector<PolygonalCurve>& curves, const HarnessOptions& opts) {
    HarnessReport rep;
    rep.degree = map.degree();
    rep.ev_depth = opts.ev_depth >= 0 ? opts.ev_depth : eventual_depth(marked);
    rep.rows.resize(curves.size());
    parallel_for(curves.size(), opts.threads, [&](std::size_t i) {
        try {
            rep.rows[i] = harness_row(map, T, marked, curves[i], rep.ev_depth);
        } catch (const std::exception& e) {
            rep.rows[i] = CurveHarnessRow{};
            rep.rows[i].error = e.what();
        }
        rep.rows[i].index = static_cast<int>(i);
    });
    for (const auto& r : rep.rows) {
        if (!r.error.empty()) {
            ++rep.failures;
            continue;
        }
        rep.oo_violations += r.oo_violations;
        rep.ess_violations += r.ess_ok ? 0 : 1;
        rep.multiplicity_mismatches += r.multiplicity_total == rep.degree ? 0 : 1;
        rep.ev_unminimized += r.ev == "unminimized" ? 1 : 0;
    }
    return rep;
}

std::vector<PolygonalCurve> random_curves(const Interface& T, const MarkedPoints& marked, int count,
                                          std::uint64_t seed, int vertices) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const double scale = diameter(T.points());
    std::vector<PolygonalCurve> out;
    for (int attempts = 0; static_cast<int>(out.size()) < count && attempts < 1000 * count; ++attempts) {
        const Complex p = T.at(U(rng)) + 0.3 * scale * U(rng) * std::polar(1.0, kTwoPi * U(rng));
        const double rho = scale * (0.15 + 0.6 * U(rng));
        double a[3], b[3];
        for (int k = 0; k < 3; ++k) {
            a[k] = 0.15 * (2.0 * U(rng) - 1.0);
            b[k] = kTwoPi * U(rng);
        }
        PolygonalCurve c;
        for (int j = 0; j < vertices; ++j) {
            const double phi = kTwoPi * j / vertices;
            double r = 1.0;
            for (int k = 0; k < 3; ++k) r += a[k] * std::cos((k + 2) * phi + b[k]);
            c.vertices.push_back(p + rho * r * std::polar(1.0, phi));
        }
        bool clear = true;
        for (const auto& x : marked.points)
            if (x.z.is_finite()) clear = clear && distance_to_polygon(c.vertices, x.z.value()) > 1e-3 * scale;
        if (!clear) continue;
        try {
            if (segment_curve(c, T).segments.empty()) continue;
        } catch (const AmbiguousMembership&) {
            continue;
        }
        out.push_back(std::move(c));
    }
    return out;
}

void write_curve_csv(std::ostream& out, const PolygonalCurve& curve) {
    out << "x,y\n";
    out.precision(17);
    for (const auto& v : curve.vertices) out << v.real() << ',' << v.imag() << '\n';
}

PolygonalCurve read_curve_csv(std::istream& in) {
    PolygonalCurve c;
    std::string line;
    int row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || (row == 1 && line.find_first_of("0123456789") != 0 && line[0] != '-')) continue;
        std::istringstream ls(line);
        double x = 0, y = 0;
        char comma = 0;
        if (!(ls >> x >> comma >> y) || comma != ',')
            throw std::invalid_argument("read_curve_csv: malformed row " + std::to_string(row));
        c.vertices.emplace_back(x, y);
    }
    if (c.vertices.size() < 3) throw std::invalid_argument("read_curve_csv: need at least 3 vertices");
    return c;
}

}  // namespace jm
