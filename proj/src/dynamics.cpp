#include "jm/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace jm {

// ---------------------------------------------------------------------------
// SpherePoint

SpherePoint::SpherePoint(Complex z) : z_(z) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
        infinite_ = true;
        z_ = Complex(0.0, 0.0);
    }
}

SpherePoint SpherePoint::infinity() {
    SpherePoint p;
    p.infinite_ = true;
    return p;
}

Complex SpherePoint::value() const {
    if (infinite_) throw std::logic_error("SpherePoint::value() called on infinity");
    return z_;
}

Complex SpherePoint::inverted() const {
    if (infinite_) return Complex(0.0, 0.0);
    if (z_ == Complex(0.0, 0.0)) return Complex(std::numeric_limits<double>::infinity(), 0.0);
    return 1.0 / z_;
}

double chordal_distance(const SpherePoint& a, const SpherePoint& b) {
    if (a.is_infinity() && b.is_infinity()) return 0.0;
    if (a.is_infinity()) return 1.0 / std::sqrt(1.0 + std::norm(b.value()));
    if (b.is_infinity()) return 1.0 / std::sqrt(1.0 + std::norm(a.value()));
    const Complex za = a.value();
    const Complex zb = b.value();
    return std::abs(za - zb) / std::sqrt((1.0 + std::norm(za)) * (1.0 + std::norm(zb)));
}

std::string to_string(const SpherePoint& p) {
    if (p.is_infinity()) return "inf";
    std::ostringstream os;
    os.precision(17);
    os << p.value().real() << (p.value().imag() < 0 ? "-" : "+") << std::abs(p.value().imag()) << "i";
    return os.str();
}

// ---------------------------------------------------------------------------
// Polynomial helpers

namespace poly {

Complex eval(std::span<const Complex> c, Complex z) {
    Complex acc(0.0, 0.0);
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * z + *it;
    return acc;
}

CoeffList derivative(std::span<const Complex> c) {
    if (c.size() <= 1) return {Complex(0.0, 0.0)};
    CoeffList d(c.size() - 1);
    for (std::size_t k = 1; k < c.size(); ++k) d[k - 1] = static_cast<double>(k) * c[k];
    return d;
}

CoeffList add(std::span<const Complex> a, std::span<const Complex> b) {
    CoeffList r(std::max(a.size(), b.size()), Complex(0.0, 0.0));
    for (std::size_t k = 0; k < a.size(); ++k) r[k] += a[k];
    for (std::size_t k = 0; k < b.size(); ++k) r[k] += b[k];
    return r;
}

CoeffList sub(std::span<const Complex> a, std::span<const Complex> b) {
    CoeffList r(std::max(a.size(), b.size()), Complex(0.0, 0.0));
    for (std::size_t k = 0; k < a.size(); ++k) r[k] += a[k];
    for (std::size_t k = 0; k < b.size(); ++k) r[k] -= b[k];
    return r;
}

CoeffList mul(std::span<const Complex> a, std::span<const Complex> b) {
    if (a.empty() || b.empty()) return {};
    CoeffList r(a.size() + b.size() - 1, Complex(0.0, 0.0));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
    return r;
}

CoeffList scale(std::span<const Complex> a, Complex s) {
    CoeffList r(a.begin(), a.end());
    for (auto& x : r) x *= s;
    return r;
}

CoeffList trim(CoeffList c, double rel_tol) {
    double mx = 0.0;
    for (const auto& x : c) mx = std::max(mx, std::abs(x));
    const double cut = rel_tol * mx;
    while (!c.empty() && std::abs(c.back()) <= cut) c.pop_back();
    return c;
}

int degree(std::span<const Complex> c) {
    for (int k = static_cast<int>(c.size()) - 1; k >= 0; --k)
        if (c[static_cast<std::size_t>(k)] != Complex(0.0, 0.0)) return k;
    return -1;
}

CoeffList taylor_shift(std::span<const Complex> c, Complex shift) {
    // Horner in polynomial arithmetic: p(z + s).
    CoeffList acc{Complex(0.0, 0.0)};
    const CoeffList lin{shift, Complex(1.0, 0.0)};
    for (auto it = c.rbegin(); it != c.rend(); ++it) {
        acc = mul(acc, lin);
        acc[0] += *it;
    }
    acc.resize(c.size());
    return acc;
}

}  // namespace poly

// ---------------------------------------------------------------------------
// Roots

namespace {

Eigen::VectorXcd companion_eigenvalues(std::span<const Complex> monic) {
    const int n = static_cast<int>(monic.size()) - 1;
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
    for (int i = 1; i < n; ++i) m(i, i - 1) = 1.0;
    for (int i = 0; i < n; ++i) m(i, n - 1) = -monic[static_cast<std::size_t>(i)];
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(m, false);
    return solver.eigenvalues();
}

}  // namespace

std::vector<Root> polynomial_roots(std::span<const Complex> coeffs, const RootOptions& opts) {
    CoeffList p = poly::trim(CoeffList(coeffs.begin(), coeffs.end()));
    const int n = static_cast<int>(p.size()) - 1;
    if (n < 0) throw std::invalid_argument("polynomial_roots: zero polynomial");
    if (n == 0) return {};

    const Complex lead = p.back();
    for (auto& c : p) c /= lead;
    if (n == 1) return {Root{-p[0], 1, 0.0, false}};

    const CoeffList dp = poly::derivative(p);
    std::vector<Complex> z(static_cast<std::size_t>(n));
    {
        const Eigen::VectorXcd ev = companion_eigenvalues(p);
        double scale = 0.0;
        for (int i = 0; i < n; ++i) scale = std::max(scale, std::abs(ev(i)));
        scale = std::max(scale, 1.0);
        for (int i = 0; i < n; ++i) {
            z[static_cast<std::size_t>(i)] = ev(i);
            // Aberth needs pairwise distinct starting points.
            for (int j = 0; j < i; ++j) {
                if (std::abs(z[static_cast<std::size_t>(i)] - z[static_cast<std::size_t>(j)]) < 1e-10 * scale) {
                    const double ang = 0.7 + 1.3 * i;
                    z[static_cast<std::size_t>(i)] += 1e-7 * scale * Complex(std::cos(ang), std::sin(ang));
                }
            }
        }
    }

    bool done = false;
    for (int it = 0; it < opts.max_iter && !done; ++it) {
        double max_rel = 0.0;
        for (int i = 0; i < n; ++i) {
            auto& zi = z[static_cast<std::size_t>(i)];
            const Complex pv = poly::eval(p, zi);
            if (pv == Complex(0.0, 0.0)) continue;
            const Complex dv = poly::eval(dp, zi);
            const Complex ratio = pv / dv;
            Complex repulsion(0.0, 0.0);
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                repulsion += 1.0 / (zi - z[static_cast<std::size_t>(j)]);
            }
            Complex w = ratio / (1.0 - ratio * repulsion);
            if (!std::isfinite(w.real()) || !std::isfinite(w.imag())) w = ratio;
            if (!std::isfinite(w.real()) || !std::isfinite(w.imag())) continue;
            zi -= w;
            max_rel = std::max(max_rel, std::abs(w) / (1.0 + std::abs(zi)));
        }
        done = max_rel < opts.tol;
    }

    std::vector<double> residuals;
    for (auto& zi : z) {
        if (!std::isfinite(zi.real()) || !std::isfinite(zi.imag()))
            throw RootFindingError("polynomial_roots: non-finite iterate", {});
        const Complex pv = poly::eval(p, zi);
        const Complex dv = poly::eval(dp, zi);
        if (std::abs(dv) > 0.0) {
            const Complex cand = zi - pv / dv;
            if (std::abs(poly::eval(p, cand)) < std::abs(pv)) zi = cand;
        }
        residuals.push_back(std::abs(poly::eval(p, zi)));
    }

    // Single-linkage clustering within cluster_radius (scaled for large roots).
    std::vector<int> label(static_cast<std::size_t>(n));
    std::iota(label.begin(), label.end(), 0);
    auto find = [&](int a) {
        while (label[static_cast<std::size_t>(a)] != a) a = label[static_cast<std::size_t>(a)];
        return a;
    };
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const auto& zi = z[static_cast<std::size_t>(i)];
            const auto& zj = z[static_cast<std::size_t>(j)];
            const double r = opts.cluster_radius * std::max(1.0, std::max(std::abs(zi), std::abs(zj)));
            if (std::abs(zi - zj) < r) label[static_cast<std::size_t>(find(j))] = find(i);
        }

    std::vector<Root> out;
    std::vector<int> seen;
    for (int i = 0; i < n; ++i) {
        const int root = find(i);
        if (std::find(seen.begin(), seen.end(), root) != seen.end()) continue;
        seen.push_back(root);
        Complex sum(0.0, 0.0);
        int m = 0;
        for (int j = 0; j < n; ++j)
            if (find(j) == root) {
                sum += z[static_cast<std::size_t>(j)];
                ++m;
            }
        const Complex c = sum / static_cast<double>(m);
        Root r{c, m, std::abs(poly::eval(p, c)), false};
        r.ill_conditioned = m > 1;
        out.push_back(r);
    }
    return out;
}

// ---------------------------------------------------------------------------
// RationalMap

namespace {

CoeffList reversed(const CoeffList& c) { return CoeffList(c.rbegin(), c.rend()); }

CoeffList monomial_times(const CoeffList& c, int k) {
    CoeffList r(static_cast<std::size_t>(k), Complex(0.0, 0.0));
    r.insert(r.end(), c.begin(), c.end());
    return r;
}

}  // namespace

RationalMap::RationalMap(CoeffList num, CoeffList den)
    : num_(poly::trim(std::move(num))), den_(poly::trim(std::move(den))) {
    if (den_.empty()) throw std::invalid_argument("RationalMap: zero denominator");
    if (num_.empty()) throw std::invalid_argument("RationalMap: zero numerator (constant map)");
    for (const auto& c : num_)
        if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
            throw std::invalid_argument("RationalMap: non-finite coefficient");
    for (const auto& c : den_)
        if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
            throw std::invalid_argument("RationalMap: non-finite coefficient");
    if (degree() < 1) throw std::invalid_argument("RationalMap: degree must be >= 1");
    if (degree() > 16) throw std::invalid_argument("RationalMap: degree above 16 is not supported");
}

RationalMap RationalMap::polynomial(CoeffList coeffs) {
    return RationalMap(std::move(coeffs), CoeffList{Complex(1.0, 0.0)});
}

SpherePoint RationalMap::operator()(const SpherePoint& zp) const {
    const int e = num_degree() - den_degree();
    if (zp.is_finite() && std::abs(zp.value()) <= 1.0) {
        const Complex z = zp.value();
        const Complex d = poly::eval(den_, z);
        const Complex n = poly::eval(num_, z);
        if (d == Complex(0.0, 0.0)) return SpherePoint::infinity();
        return SpherePoint(n / d);
    }
    // Chart at infinity: w = 1/z, R(z) = z^e * Nrev(w) / Drev(w).
    const Complex w = zp.inverted();
    const CoeffList nr = reversed(num_);
    const CoeffList dr = reversed(den_);
    const Complex nw = poly::eval(nr, w);
    const Complex dw = poly::eval(dr, w);
    if (zp.is_infinity()) {
        if (e > 0) return SpherePoint::infinity();
        if (e < 0) return SpherePoint(Complex(0.0, 0.0));
        return SpherePoint(nw / dw);
    }
    if (dw == Complex(0.0, 0.0)) return SpherePoint::infinity();
    const Complex ratio = nw / dw;
    const Complex z = zp.value();
    Complex zpow(1.0, 0.0);
    if (e > 0)
        for (int k = 0; k < e; ++k) zpow *= z;
    else
        for (int k = 0; k < -e; ++k) zpow *= w;
    return SpherePoint(ratio * zpow);
}

SpherePoint eval(const RationalMap& map, const SpherePoint& z) { return map(z); }

Complex RationalMap::derivative(Complex z) const {
    const Complex n = poly::eval(num_, z);
    const Complex d = poly::eval(den_, z);
    const Complex dn = poly::eval(poly::derivative(num_), z);
    const Complex dd = poly::eval(poly::derivative(den_), z);
    return (dn * d - n * dd) / (d * d);
}

CoeffList RationalMap::wronskian() const {
    const CoeffList a = poly::mul(poly::derivative(num_), den_);
    const CoeffList b = poly::mul(num_, poly::derivative(den_));
    // Leading terms can cancel algebraically yet leave rounding residue.
    return poly::trim(poly::sub(a, b), 1e-13);
}

RationalMap RationalMap::inverted() const {
    const int e = num_degree() - den_degree();
    const CoeffList nr = reversed(num_);
    const CoeffList dr = reversed(den_);
    if (e >= 0) return RationalMap(monomial_times(dr, e), nr);
    return RationalMap(dr, monomial_times(nr, -e));
}

RationalMap RationalMap::recentered(Complex shift) const {
    const CoeffList n = poly::taylor_shift(num_, shift);
    const CoeffList d = poly::taylor_shift(den_, shift);
    return RationalMap(poly::sub(n, poly::scale(d, shift)), d);
}

bool has_common_root(const RationalMap& map, double tol) {
    if (map.num_degree() == 0 || map.den_degree() == 0) return false;
    const auto rn = polynomial_roots(map.num());
    const auto rd = polynomial_roots(map.den());
    for (const auto& a : rn)
        for (const auto& b : rd)
            if (std::abs(a.z - b.z) < tol * std::max(1.0, std::abs(a.z))) return true;
    return false;
}

std::vector<CriticalPoint> critical_points(const RationalMap& map) {
    const int d = map.degree();
    std::vector<CriticalPoint> out;
    if (d < 2) return out;
    const CoeffList w = map.wronskian();
    int finite_total = 0;
    for (const auto& r : polynomial_roots(w)) {
        out.push_back(CriticalPoint{SpherePoint(r.z), r.multiplicity + 1});
        finite_total += r.multiplicity;
    }
    const int at_inf = 2 * d - 2 - finite_total;
    if (at_inf < 0) throw RootFindingError("critical_points: Riemann-Hurwitz budget exceeded", {});
    if (at_inf > 0) out.push_back(CriticalPoint{SpherePoint::infinity(), at_inf + 1});
    return out;
}

PreimageSet preimage_roots(const RationalMap& map, const SpherePoint& w) {
    const int d = map.degree();
    PreimageSet out;
    // Solve N - w D = 0, or D - (1/w) N = 0 in the chart at infinity.
    CoeffList eq;
    if (w.is_finite() && std::abs(w.value()) <= 1.0)
        eq = poly::sub(map.num(), poly::scale(map.den(), w.value()));
    else
        eq = poly::sub(map.den(), poly::scale(map.num(), w.inverted()));
    eq = poly::trim(std::move(eq), 1e-14);
    if (eq.empty()) throw std::invalid_argument("preimage_roots: degenerate map");
    int finite_total = 0;
    for (const auto& r : polynomial_roots(eq)) {
        out.finite.push_back(r);
        finite_total += r.multiplicity;
    }
    out.at_infinity = d - finite_total;
    return out;
}

std::vector<SpherePoint> preimages(const RationalMap& map, const SpherePoint& w) {
    const PreimageSet set = preimage_roots(map, w);
    std::vector<SpherePoint> out;
    for (const auto& r : set.finite)
        for (int k = 0; k < r.multiplicity; ++k) out.emplace_back(r.z);
    for (int k = 0; k < set.at_infinity; ++k) out.push_back(SpherePoint::infinity());
    return out;
}

std::vector<SpherePoint> forward_orbit(const RationalMap& map, const SpherePoint& z, int n) {
    std::vector<SpherePoint> out{z};
    out.reserve(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k < n; ++k) out.push_back(map(out.back()));
    return out;
}

bool attracted_to(const RationalMap& map, const SpherePoint& z, const SpherePoint& center, const BasinTest& t) {
    SpherePoint w = z;
    for (int k = 0; k <= t.max_iter; ++k) {
        if (chordal_distance(w, center) < t.radius) return true;
        w = map(w);
    }
    return false;
}

bool on_basin_boundary(const RationalMap& map, Complex z, const SpherePoint& center, double probe_radius, int probes,
                       const BasinTest& t) {
    int inside = 0;
    for (int j = 0; j < probes; ++j) {
        const Complex p = z + std::polar(probe_radius, kTwoPi * (j + 0.5) / probes);
        if (attracted_to(map, p, center, t)) ++inside;
    }
    return inside > 0 && inside < probes;
}

// ---------------------------------------------------------------------------
// Newton

const char* to_string(NewtonStatus s) {
    switch (s) {
        case NewtonStatus::Converged: return "converged";
        case NewtonStatus::MaxIterations: return "max_iterations";
        case NewtonStatus::SingularJacobian: return "singular_jacobian";
        case NewtonStatus::NonFinite: return "non_finite";
    }
    return "unknown";
}

namespace {

bool all_finite(const RealVector& v) { return v.allFinite(); }

}  // namespace

NewtonResult newton_solve(const ResidualFn& residual, RealVector seed, const NewtonOptions& opts) {
    NewtonResult res;
    RealVector x = std::move(seed);
    RealVector f = residual(x);
    if (!all_finite(f)) {
        res.x = x;
        res.residual_norm = std::numeric_limits<double>::infinity();
        res.status = NewtonStatus::NonFinite;
        res.diagnostic = "residual not finite at seed";
        return res;
    }
    double norm = f.norm();
    res.x = x;
    res.residual_norm = norm;

    const Eigen::Index n = x.size();
    for (int it = 0; it < opts.max_iter; ++it) {
        res.iterations = it;
        if (norm < opts.tol) {
            res.status = NewtonStatus::Converged;
            return res;
        }
        Eigen::MatrixXd jac(f.size(), n);
        for (Eigen::Index j = 0; j < n; ++j) {
            const double h = opts.fd_step * std::max(1.0, std::abs(x(j)));
            RealVector xp = x;
            RealVector xm = x;
            xp(j) += h;
            xm(j) -= h;
            jac.col(j) = (residual(xp) - residual(xm)) / (2.0 * h);
        }
        if (!jac.allFinite()) {
            res.status = NewtonStatus::NonFinite;
            res.diagnostic = "Jacobian not finite";
            return res;
        }
        RealVector step;
        if (jac.rows() == jac.cols()) {
            Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
            if (lu.rank() < n) {
                res.status = NewtonStatus::SingularJacobian;
                std::ostringstream os;
                os << "Jacobian rank " << lu.rank() << " < " << n << " at residual " << norm;
                res.diagnostic = os.str();
                return res;
            }
            step = -lu.solve(f);
        } else {
            step = -jac.colPivHouseholderQr().solve(f);
        }

        double lambda = 1.0;
        bool accepted = false;
        for (int h = 0; h <= opts.max_halvings; ++h, lambda *= 0.5) {
            const RealVector xn = x + lambda * step;
            const RealVector fn = residual(xn);
            if (all_finite(fn) && fn.norm() < norm) {
                x = xn;
                f = fn;
                norm = fn.norm();
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            res.iterations = it + 1;
            res.status = NewtonStatus::MaxIterations;
            res.diagnostic = "line search stalled";
            return res;
        }
        res.x = x;
        res.residual_norm = norm;
    }
    res.iterations = opts.max_iter;
    res.status = norm < opts.tol ? NewtonStatus::Converged : NewtonStatus::MaxIterations;
    if (!res.converged()) res.diagnostic = "iteration limit reached";
    return res;
}

RealVector pack(std::span<const Complex> z) {
    RealVector v(static_cast<Eigen::Index>(2 * z.size()));
    for (std::size_t k = 0; k < z.size(); ++k) {
        v(static_cast<Eigen::Index>(2 * k)) = z[k].real();
        v(static_cast<Eigen::Index>(2 * k + 1)) = z[k].imag();
    }
    return v;
}

std::vector<Complex> unpack(const RealVector& v) {
    std::vector<Complex> z(static_cast<std::size_t>(v.size() / 2));
    for (std::size_t k = 0; k < z.size(); ++k)
        z[k] = Complex(v(static_cast<Eigen::Index>(2 * k)), v(static_cast<Eigen::Index>(2 * k + 1)));
    return z;
}

}  // namespace jm
