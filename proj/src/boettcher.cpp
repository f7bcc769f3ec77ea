#include "jm/boettcher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "jm/parallel.hpp"

namespace jm {

namespace {

RationalMap localize(const RationalMap& map, const SpherePoint& center) {
    if (center.is_infinity()) return map.inverted();
    if (center.value() == Complex(0.0)) return map;
    return map.recentered(center.value());
}

double wrap_turns(double t) {
    t = std::fmod(t, 1.0);
    return t < 0 ? t + 1.0 : t;
}

// Circular distance between two angles in turns.
double turn_distance(double a, double b) {
    const double d = wrap_turns(a - b);
    return std::min(d, 1.0 - d);
}

}  // namespace

BoettcherChart::BoettcherChart(RationalMap map, SpherePoint center, const ChartOptions& opts)
    : map_(std::move(map)), center_(center), h_(localize(map_, center_)), basin_(opts.basin) {
    CoeffList num = h_.num();
    double scale = 0.0;
    for (const auto& c : num) scale = std::max(scale, std::abs(c));
    std::size_t k = 0;
    while (k < num.size() && std::abs(num[k]) <= 1e-9 * scale) num[k++] = 0.0;
    d0_ = static_cast<int>(k);
    if (d0_ < 2 || d0_ >= static_cast<int>(num.size()) || std::abs(h_.den()[0]) <= 1e-12 * scale)
        throw std::invalid_argument("BoettcherChart: center is not a superattracting fixed point");
    h_ = RationalMap(num, h_.den());
    lead_ = num[k] / h_.den()[0];
    shifted_num_.assign(num.begin() + static_cast<std::ptrdiff_t>(k), num.end());

    const int dm1 = d0_ - 1;
    root_index_ = ((opts.root_index % dm1) + dm1) % dm1;
    lambda_ = std::pow(lead_, 1.0 / dm1) * std::polar(1.0, kTwoPi * root_index_ / dm1);

    for (const auto& cp : critical_points(h_))
        if (cp.point.is_finite() && std::abs(cp.point.value()) > 1e-12)
            critical_local_.emplace_back(cp.point.value(), cp.local_degree);

    // Core disk: ratio within 1/4 of 1 and h contracting by at least 2.
    double singular = std::numeric_limits<double>::infinity();
    for (const auto& r : polynomial_roots(shifted_num_)) singular = std::min(singular, std::abs(r.z));
    if (h_.den().size() > 1)
        for (const auto& r : polynomial_roots(h_.den())) singular = std::min(singular, std::abs(r.z));
    double rho = std::min(1.0, 0.5 * singular);
    auto acceptable = [&](double r) {
        if (std::abs(lead_) * std::pow(r, dm1) * 1.25 > 0.5) return false;
        for (int j = 0; j < 64; ++j)
            if (std::abs(ratio(std::polar(r, kTwoPi * j / 64)) - 1.0) > 0.25) return false;
        return true;
    };
    while (!acceptable(rho)) {
        rho *= 0.5;
        if (rho < 1e-12) throw std::runtime_error("BoettcherChart: no core disk found");
    }
    core_ = rho;
    place_cut(opts);
}

Complex BoettcherChart::to_local(const SpherePoint& z) const {
    if (center_.is_infinity()) {
        if (z.is_infinity()) return 0.0;
        return 1.0 / z.value();
    }
    if (z.is_infinity()) throw OutsideBasin("BoettcherChart: infinity is not in a finite basin");
    return z.value() - center_.value();
}

SpherePoint BoettcherChart::from_local(Complex u) const {
    if (center_.is_infinity()) return u == Complex(0.0) ? SpherePoint::infinity() : SpherePoint(1.0 / u);
    return SpherePoint(u + center_.value());
}

bool BoettcherChart::in_basin(const SpherePoint& z) const {
    Complex u;
    try {
        u = to_local(z);
    } catch (const OutsideBasin&) {
        return false;
    }
    for (int k = 0; k <= basin_.max_iter; ++k) {
        if (std::abs(u) < basin_.radius) return true;
        const SpherePoint next = h_(u);
        if (next.is_infinity()) return false;
        u = next.value();
        if (!std::isfinite(u.real()) || !std::isfinite(u.imag())) return false;
    }
    return false;
}

Complex BoettcherChart::ratio(Complex u) const {
    return poly::eval(shifted_num_, u) / (lead_ * poly::eval(h_.den(), u));
}

Complex BoettcherChart::log_ratio(Complex u) const {
    const Complex r = ratio(u);
    double th = std::arg(r);
    while (th > cut_) th -= kTwoPi;
    while (th <= cut_ - kTwoPi) th += kTwoPi;
    return {std::log(std::abs(r)), th};
}

Complex BoettcherChart::local_value(Complex u) const {
    if (u == Complex(0.0)) return 0.0;
    Complex sum = 0.0;
    double w = 1.0 / d0_;
    Complex uk = u;
    int outside = 0;
    for (int k = 0; k < 4000; ++k) {
        if (uk == Complex(0.0)) break;
        const bool in_core = std::abs(uk) <= core_;
        if (!in_core && ++outside > basin_.max_iter)
            throw OutsideBasin("BoettcherChart: orbit does not reach the core");
        const Complex term = log_ratio(uk) * w;
        sum += term;
        if (in_core && std::abs(term) < 1e-18) break;
        const SpherePoint next = h_(uk);
        if (next.is_infinity() || !std::isfinite(std::abs(next.value())))
            throw OutsideBasin("BoettcherChart: orbit leaves the plane");
        uk = next.value();
        w /= d0_;
        if (w == 0.0) break;
    }
    return lambda_ * u * std::exp(sum);
}

Complex BoettcherChart::value(const SpherePoint& z) const { return local_value(to_local(z)); }

Complex BoettcherChart::core_value(Complex u) const { return local_value(u); }

Complex BoettcherChart::core_inverse(Complex v) const {
    if (v == Complex(0.0)) return 0.0;
    Complex u = v / lambda_;
    for (int it = 0; it < 60; ++it) {
        const Complex f = core_value(u) - v;
        if (std::abs(f) <= 1e-15 * std::abs(v)) break;
        const double d = 1e-6 * std::abs(u);
        const Complex df = (core_value(u + d) - core_value(u - d)) / (2.0 * d);
        u -= f / df;
    }
    return u;
}

Complex BoettcherChart::pull_back(Complex target, Complex seed) const {
    // Near a critical point c of multiplicity m the other preimages of
    // h(z) sit close to c + (z - c) e^{2 pi i k/m}; the seed must be clearly
    // nearer z than any of them, so the pullback stays on its sheet.
    auto same_sheet = [&](Complex z) {
        const double d = std::abs(z - seed);
        auto clear_of = [&](Complex c, int m) {
            for (int k = 1; k < m; ++k)
                if (std::abs(c + (z - c) * std::polar(1.0, kTwoPi * k / m) - seed) <= 2.0 * d) return false;
            return true;
        };
        if (!clear_of(0.0, d0_)) return false;
        for (const auto& [c, m] : critical_local_)
            if (!clear_of(c, m)) return false;
        return true;
    };
    Complex z = seed;
    for (int it = 0; it < 40; ++it) {
        const SpherePoint hz = h_(z);
        if (hz.is_infinity()) break;
        const Complex step = (hz.value() - target) / h_.derivative(z);
        if (!std::isfinite(std::abs(step))) break;
        z -= step;
        if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(z))) {
            const SpherePoint chk = h_(z);
            if (chk.is_finite() && std::abs(chk.value() - target) <= 1e-11 * std::max(1.0, std::abs(target)) &&
                same_sheet(z))
                return z;
            break;
        }
    }
    return {std::numeric_limits<double>::quiet_NaN(), 0.0};
}

Complex BoettcherChart::local_inverse(Complex w) const {
    const double radius = std::abs(w);
    if (!(radius < 1.0)) throw std::invalid_argument("inverse_boettcher: |w| must be < 1");
    if (radius == 0.0) return 0.0;
    const double turns = wrap_turns(std::arg(w) / kTwoPi);
    const double vmax = 0.5 * std::min(1.0, std::abs(lambda_) * core_);

    auto depth = [&](double t) {
        int n = 0;
        while (t > vmax) {
            t = std::pow(t, d0_);
            ++n;
        }
        return n;
    };

    double t = std::min(radius, vmax);
    Complex z0 = core_inverse(std::polar(t, kTwoPi * turns));
    std::vector<Complex> orbit;
    while (t < radius) {
        double dt = std::min(0.05, 0.25 * (1.0 - t));
        while (true) {
            const double tn = std::min(radius, t + dt);
            const int n = depth(tn);
            double power = 1.0;
            for (int k = 0; k < n; ++k) power *= d0_;
            const Complex v = core_inverse(std::polar(std::pow(tn, power), kTwoPi * wrap_turns(turns * power)));
            orbit.assign(static_cast<std::size_t>(n) + 1, 0.0);
            orbit[0] = z0;
            bool ok = true;
            for (int k = 1; k <= n && ok; ++k) {
                const SpherePoint nx = h_(orbit[static_cast<std::size_t>(k - 1)]);
                ok = nx.is_finite();
                if (ok) orbit[static_cast<std::size_t>(k)] = nx.value();
            }
            Complex target = v;
            for (int k = n - 1; k >= 0 && ok; --k) {
                target = pull_back(target, orbit[static_cast<std::size_t>(k)]);
                ok = std::isfinite(target.real());
            }
            if (ok) {
                z0 = target;
                t = tn;
                break;
            }
            dt *= 0.5;
            if (dt < 1e-14) throw PrecisionLoss("inverse_boettcher: continuation stalled", t);
        }
    }
    return z0;
}

SpherePoint BoettcherChart::inverse(Complex w) const { return from_local(local_inverse(w)); }

double BoettcherChart::functional_residual(const SpherePoint& z) const {
    const Complex u = to_local(z);
    const SpherePoint hu = h_(u);
    if (hu.is_infinity()) throw OutsideBasin("functional_residual: image at infinity");
    return std::abs(local_value(hu.value()) - std::pow(local_value(u), d0_));
}

void BoettcherChart::place_cut(const ChartOptions& opts) {
    // The continuous branch of arg(ratio) on the basin vanishes at the center.
    // Track it along the internal ray of angle 0 and then around the level
    // curve; the cut goes opposite the middle of the range. Inverses do not
    // depend on the cut, so this is not circular.
    const double eps = opts.cut_epsilon;
    std::vector<Complex> path;
    for (int j = 1; j <= 16; ++j) path.push_back(local_inverse(Complex(0.5 * j / 16.0, 0)));
    for (int j = 1; j <= 48; ++j) path.push_back(local_inverse(Complex(1.0 - 0.5 * std::pow(2.0 * eps, j / 48.0), 0)));
    const std::size_t ray_end = path.size();
    const int n = std::max(64, opts.cut_samples);
    for (int j = 1; j <= n; ++j) path.push_back(local_inverse(std::polar(1.0 - eps, kTwoPi * j / n)));

    double cur = 0.0, prev = 0.0, lo = 0.0, hi = 0.0, at_ray_end = 0.0;
    for (std::size_t i = 0; i < path.size(); ++i) {
        const double a = std::arg(ratio(path[i]));
        double d = a - prev;
        while (d > kPi) d -= kTwoPi;
        while (d <= -kPi) d += kTwoPi;
        cur += d;
        prev = a;
        lo = std::min(lo, cur);
        hi = std::max(hi, cur);
        if (i + 1 == ray_end) at_ray_end = cur;
    }
    if (std::abs(cur - at_ray_end) > 1.0)
        throw std::runtime_error("BoettcherChart: log of the ratio is not single valued on the sampled basin");
    if (hi - lo > kTwoPi - 0.2) throw std::runtime_error("BoettcherChart: no branch cut avoids the sampled basin");
    cut_ = 0.5 * (lo + hi) + kPi;
}

// ---------------------------------------------------------------------------

double signed_area(const std::vector<Complex>& poly) {
    double a = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Complex& p = poly[i];
        const Complex& q = poly[(i + 1) % poly.size()];
        a += p.real() * q.imag() - q.real() * p.imag();
    }
    return 0.5 * a;
}

bool point_in_polygon(const std::vector<Complex>& poly, Complex p) {
    bool inside = false;
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Complex a = poly[i], b = poly[j];
        if ((a.imag() > p.imag()) != (b.imag() > p.imag())) {
            const double x = a.real() + (p.imag() - a.imag()) / (b.imag() - a.imag()) * (b.real() - a.real());
            if (p.real() < x) inside = !inside;
        }
    }
    return inside;
}

namespace {

double cross(Complex a, Complex b, Complex c) {
    return (b.real() - a.real()) * (c.imag() - a.imag()) - (b.imag() - a.imag()) * (c.real() - a.real());
}

bool on_segment(Complex a, Complex b, Complex p) {
    return std::min(a.real(), b.real()) <= p.real() && p.real() <= std::max(a.real(), b.real()) &&
           std::min(a.imag(), b.imag()) <= p.imag() && p.imag() <= std::max(a.imag(), b.imag());
}

bool segments_intersect(Complex a, Complex b, Complex c, Complex d) {
    const double d1 = cross(c, d, a), d2 = cross(c, d, b), d3 = cross(a, b, c), d4 = cross(a, b, d);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
    if (d1 == 0 && on_segment(c, d, a)) return true;
    if (d2 == 0 && on_segment(c, d, b)) return true;
    if (d3 == 0 && on_segment(a, b, c)) return true;
    if (d4 == 0 && on_segment(a, b, d)) return true;
    return false;
}

}  // namespace

std::optional<std::pair<int, int>> polygon_self_intersection(const std::vector<Complex>& poly) {
    const int n = static_cast<int>(poly.size());
    if (n < 3) return std::nullopt;
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    auto xmin = [&](int i) { return std::min(poly[static_cast<std::size_t>(i)].real(), poly[static_cast<std::size_t>((i + 1) % n)].real()); };
    auto xmax = [&](int i) { return std::max(poly[static_cast<std::size_t>(i)].real(), poly[static_cast<std::size_t>((i + 1) % n)].real()); };
    std::sort(order.begin(), order.end(), [&](int a, int b) { return xmin(a) < xmin(b); });
    for (int oi = 0; oi < n; ++oi) {
        const int i = order[static_cast<std::size_t>(oi)];
        const double right = xmax(i);
        for (int oj = oi + 1; oj < n; ++oj) {
            const int j = order[static_cast<std::size_t>(oj)];
            if (xmin(j) > right) break;
            if (j == (i + 1) % n || i == (j + 1) % n) continue;  // neighbours share a vertex
            if (segments_intersect(poly[static_cast<std::size_t>(i)], poly[static_cast<std::size_t>((i + 1) % n)],
                                   poly[static_cast<std::size_t>(j)], poly[static_cast<std::size_t>((j + 1) % n)]))
                return std::pair{std::min(i, j), std::max(i, j)};
        }
    }
    return std::nullopt;
}

BoundaryParametrization boundary_parametrization(const BoettcherChart& chart, int n, double epsilon, int threads) {
    if (n < 16) throw std::invalid_argument("boundary_parametrization: n must be at least 16");
    if (!(epsilon > 0.0 && epsilon <= 1e-3)) throw std::invalid_argument("boundary_parametrization: need 0 < eps <= 1e-3");
    BoundaryParametrization bp;
    bp.epsilon = epsilon;
    bp.angles.resize(static_cast<std::size_t>(n));
    std::vector<Complex> local(static_cast<std::size_t>(n));
    std::vector<std::string> errors(static_cast<std::size_t>(n));
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t j) {
        bp.angles[j] = static_cast<double>(j) / n;
        try {
            local[j] = chart.local_inverse(std::polar(1.0 - epsilon, kTwoPi * bp.angles[j]));
        } catch (const std::exception& e) {
            errors[j] = e.what();
        }
    });
    for (const auto& e : errors)
        if (!e.empty()) throw PrecisionLoss("boundary_parametrization: " + e, epsilon);
    if (const auto hit = polygon_self_intersection(local))
        throw NotJordanAtResolution("boundary_parametrization: edges " + std::to_string(hit->first) + " and " +
                                        std::to_string(hit->second) + " cross",
                                    hit->first, hit->second);
    if (signed_area(local) <= 0.0)
        throw NotJordanAtResolution("boundary_parametrization: polygon is not counterclockwise", -1, -1);
    bp.points.reserve(local.size());
    for (const auto& u : local) bp.points.push_back(chart.from_local(u));
    return bp;
}

EquivarianceDefect boundary_equivariance(const BoettcherChart& chart, const BoundaryParametrization& bp) {
    EquivarianceDefect out;
    const std::size_t n = bp.points.size();
    for (std::size_t j = 0; j < n; ++j) {
        const Complex u = chart.to_local(bp.points[j]);
        const SpherePoint fu = chart.local_map()(u);
        const std::size_t target = (static_cast<std::size_t>(chart.d0()) * j) % n;
        const Complex v = chart.to_local(bp.points[target]);
        out.max_distance = std::max(out.max_distance, std::abs(fu.value() - v));
        const double ang = wrap_turns(std::arg(chart.local_value(fu.value())) / kTwoPi);
        out.max_angle = std::max(out.max_angle, turn_distance(ang, bp.angles[target]));
    }
    return out;
}

namespace {

// Rays reach a critical boundary point only like a small power of eps, too
// slowly for a plain tolerance: there a ray counts as landing when its
// distance d at eps keeps shrinking geometrically as eps goes down.
bool ray_converges(const BoettcherChart& chart, double turns, Complex u, double d, double epsilon) {
    try {
        const double d2 = std::abs(chart.local_inverse(std::polar(1.0 - 100.0 * epsilon, kTwoPi * turns)) - u);
        const double d1 = std::abs(chart.local_inverse(std::polar(1.0 - 10.0 * epsilon, kTwoPi * turns)) - u);
        return d < 0.6 * d2 && d1 < 0.8 * d2 && d < 0.8 * d1;
    } catch (const std::exception&) {
        return false;
    }
}

}  // namespace

bool ray_lands_at(const BoettcherChart& chart, double turns, const SpherePoint& z, double epsilon) {
    Complex u;
    try {
        u = chart.to_local(z);
    } catch (const std::exception&) {
        return false;
    }
    const double tol = 1e-2 * (1.0 + std::abs(u));
    // A ray that lands on a critical point can stall the continuation just
    // short of it; back off to coarser radii then.
    for (double eps = epsilon; eps <= 1e-3 * (1.0 + 1e-9); eps *= 10.0) {
        try {
            const double d = std::abs(chart.local_inverse(std::polar(1.0 - eps, kTwoPi * turns)) - u);
            return d <= tol || (d <= 20.0 * tol && ray_converges(chart, turns, u, d, eps));
        } catch (const PrecisionLoss&) {
        } catch (const std::exception&) {
            return false;
        }
    }
    return false;
}

void annotate_boundary_angles(CriticalOrbitPortrait& portrait, const BoettcherChart& chart, double epsilon) {
    const int d0 = chart.d0();
    const std::size_t n = portrait.nodes.size();
    auto local_of = [&](std::size_t i) -> std::optional<Complex> {
        const auto& node = portrait.nodes[i];
        if (node.marked) return std::nullopt;
        try {
            return chart.to_local(node.point);
        } catch (const OutsideBasin&) {
            return std::nullopt;
        }
    };
    auto landing_at = [&](const Angle& a, double eps) {
        return chart.local_inverse(std::polar(1.0 - eps, kTwoPi * a.turns()));
    };
    auto landing = [&](const Angle& a) { return landing_at(a, epsilon); };
    auto converging = [&](const Angle& a, Complex u, double d) {
        return ray_converges(chart, a.turns(), u, d, epsilon);
    };
    // Best candidate when it is close and clearly better than the runner-up.
    // Several angles land at a critical boundary point, so there the
    // runner-up may be just as close.
    auto choose = [&](Complex u, const std::vector<Angle>& cands, bool critical) -> std::optional<Angle> {
        std::vector<std::pair<double, Angle>> d;
        for (const auto& a : cands) d.emplace_back(std::abs(landing(a) - u), a);
        std::sort(d.begin(), d.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
        if (d.empty()) return std::nullopt;
        const double tol = 1e-2 * (1.0 + std::abs(u));
        if (critical) {
            if (d[0].first <= tol) return d[0].second;
            for (const auto& [dist, a] : d)
                if (dist <= 20.0 * tol && converging(a, u, dist)) return a;
            return std::nullopt;
        }
        if (d[0].first > tol) return std::nullopt;
        if (d.size() > 1 && d[1].first < 5.0 * d[0].first) return std::nullopt;
        return d[0].second;
    };

    for (auto& node : portrait.nodes) node.boundary_angle.reset();

    // Periodic nodes.
    for (std::size_t i = 0; i < n; ++i) {
        if (portrait.nodes[i].boundary_angle) continue;
        const OrbitShape s = orbit_shape(portrait, static_cast<int>(i));
        if (s.preperiod != 0) continue;
        const auto u = local_of(i);
        if (!u) continue;
        long m = 1;
        for (int k = 0; k < s.period; ++k) m *= d0;
        if (m - 1 > 4096) continue;
        std::vector<Angle> cands;
        for (long j = 0; j < m - 1; ++j) cands.push_back(Angle::of(j, m - 1));
        const auto a = choose(*u, cands, portrait.nodes[i].critical());
        if (!a) continue;
        // Walk the cycle and confirm every member lands where expected.
        std::vector<std::pair<std::size_t, Angle>> cyc;
        Angle cur = *a;
        std::size_t idx = i;
        bool ok = true;
        for (int k = 0; k < s.period && ok; ++k) {
            const auto uk = local_of(idx);
            ok = uk && std::abs(landing(cur) - *uk) <= 1e-2 * (1.0 + std::abs(*uk));
            cyc.emplace_back(idx, cur);
            cur = Angle::of(cur.num * d0, cur.den);
            idx = static_cast<std::size_t>(portrait.nodes[idx].next);
        }
        if (ok)
            for (const auto& [k, ang] : cyc) portrait.nodes[k].boundary_angle = ang;
    }

    // Preimages, until nothing changes.
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            auto& node = portrait.nodes[i];
            if (node.boundary_angle || node.next < 0) continue;
            const auto& img = portrait.nodes[static_cast<std::size_t>(node.next)].boundary_angle;
            if (!img) continue;
            const auto u = local_of(i);
            if (!u) continue;
            // A critical image may be the landing point of several angles
            // with the same denominator; pull back all of them.
            std::vector<Angle> images{*img};
            const auto& inode = portrait.nodes[static_cast<std::size_t>(node.next)];
            if (inode.critical() && img->den <= 4096) {
                const auto ui = local_of(static_cast<std::size_t>(node.next));
                for (long j = 0; ui && j < img->den; ++j) {
                    const Angle b = Angle::of(j, img->den);
                    if (b == *img) continue;
                    const double tol = 1e-2 * (1.0 + std::abs(*ui));
                    const double dist = std::abs(landing(b) - *ui);
                    if (dist <= tol || (dist <= 20.0 * tol && converging(b, *ui, dist))) images.push_back(b);
                }
            }
            std::vector<Angle> cands;
            for (const auto& im : images)
                for (int j = 0; j < d0; ++j) cands.push_back(Angle::of(im.num + j * im.den, im.den * d0));
            if (const auto a = choose(*u, cands, node.critical())) {
                node.boundary_angle = a;
                changed = true;
            }
        }
    }
}

}  // namespace jm
