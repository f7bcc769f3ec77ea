#include "jm/render.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "jm/parallel.hpp"

namespace jm {

Complex Viewport::pixel(int i, int j) const {
    const double px = pixel_width();
    const double height = px * h;
    return center + Complex(-0.5 * width + (i + 0.5) * px, 0.5 * height - (j + 0.5) * px);
}

void Viewport::validate() const {
    if (!(width > 0.0)) throw std::invalid_argument("viewport width must be positive");
    if (w < 64 || h < 64) throw std::invalid_argument("viewport needs at least 64x64 pixels");
}

namespace {

// RationalMap::operator() rebuilds the reversed coefficient lists at every
// call outside the unit disk; the pixel loop keeps them around.
class FastMap {
public:
    explicit FastMap(const RationalMap& m) : num_(m.num()), den_(m.den()), e_(m.num_degree() - m.den_degree()) {
        nr_.assign(num_.rbegin(), num_.rend());
        dr_.assign(den_.rbegin(), den_.rend());
    }

    SpherePoint operator()(const SpherePoint& zp) const {
        if (zp.is_finite() && std::abs(zp.value()) <= 1.0) {
            const Complex z = zp.value();
            const Complex d = poly::eval(den_, z);
            if (d == Complex(0.0, 0.0)) return SpherePoint::infinity();
            return SpherePoint(poly::eval(num_, z) / d);
        }
        if (zp.is_infinity()) {
            if (e_ > 0) return SpherePoint::infinity();
            if (e_ < 0) return SpherePoint(Complex(0.0, 0.0));
            return SpherePoint(nr_.front() / dr_.front());
        }
        const Complex z = zp.value();
        const Complex w = 1.0 / z;
        const Complex dw = poly::eval(dr_, w);
        if (dw == Complex(0.0, 0.0)) return SpherePoint::infinity();
        Complex v = poly::eval(nr_, w) / dw;
        for (int k = 0; k < std::abs(e_); ++k) v = e_ > 0 ? v * z : v * w;
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return SpherePoint::infinity();
        return SpherePoint(v);
    }

private:
    CoeffList num_, den_, nr_, dr_;
    int e_;
};

// A point at chordal distance about delta from z.
SpherePoint nudge(const SpherePoint& z, double delta) {
    if (z.is_infinity()) return SpherePoint(Complex(2.0 / delta, 0.0));
    const Complex v = z.value();
    return SpherePoint(v + Complex(0.5 * delta * (1.0 + std::norm(v)), 0.0));
}

}  // namespace

std::vector<AttractingCycle> attracting_cycles(const RationalMap& map, int max_iter) {
    const FastMap R(map);
    std::vector<AttractingCycle> out;
    for (const auto& cp : critical_points(map)) {
        SpherePoint z = cp.point;
        for (int n = 0; n < max_iter; ++n) z = R(z);
        std::vector<SpherePoint> cycle{z};
        SpherePoint w = R(z);
        while (cycle.size() <= 64 && chordal_distance(w, z) > 1e-9) {
            cycle.push_back(w);
            w = R(w);
        }
        if (cycle.size() > 64) continue;
        double mult = 1.0;
        for (const auto& p : cycle) {
            constexpr double delta = 1e-7;
            const SpherePoint q = nudge(p, delta);
            mult *= chordal_distance(R(q), R(p)) / chordal_distance(q, p);
        }
        if (!(mult < 1.0 - 1e-6)) continue;
        bool known = false;
        for (const auto& c : out)
            for (const auto& p : c.points) known = known || chordal_distance(p, z) < 1e-6;
        if (!known) out.push_back({std::move(cycle), mult});
    }
    return out;
}

PointClass classify_point(const RationalMap& map, const SpherePoint& z, const std::vector<AttractingCycle>& cycles,
                          int max_iter) {
    const FastMap R(map);
    SpherePoint w = z;
    for (int n = 0; n <= max_iter; ++n) {
        for (std::size_t c = 0; c < cycles.size(); ++c)
            for (const auto& p : cycles[c].points)
                if (chordal_distance(w, p) < 1e-6) return {static_cast<int>(c), n};
        if (n < max_iter) w = R(w);
    }
    return {kJuliaProxy, max_iter};
}

std::vector<long> Raster::histogram() const {
    std::vector<long> h(static_cast<std::size_t>(cycles) + 1, 0);
    for (int l : labels) ++h[static_cast<std::size_t>(l + 1)];
    return h;
}

Raster render(const RationalMap& map, const Viewport& vp, const std::vector<AttractingCycle>& cycles, int max_iter,
              int threads) {
    vp.validate();
    Raster r;
    r.viewport = vp;
    r.cycles = static_cast<int>(cycles.size());
    const auto n = static_cast<std::size_t>(vp.w) * vp.h;
    r.labels.assign(n, kJuliaProxy);
    r.iterations.assign(n, 0);
    parallel_for(static_cast<std::size_t>(vp.h), threads, [&](std::size_t j) {
        for (int i = 0; i < vp.w; ++i) {
            const auto c = classify_point(map, vp.pixel(i, static_cast<int>(j)), cycles, max_iter);
            r.labels[j * vp.w + i] = c.label;
            r.iterations[j * vp.w + i] = c.iterations;
        }
    });
    return r;
}

namespace {

void hsv(double h, double s, double v, unsigned char* rgb) {
    h = 6.0 * (h - std::floor(h));
    const int sector = static_cast<int>(h) % 6;
    const double f = h - std::floor(h);
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    double c[3];
    switch (sector) {
        case 0: c[0] = v, c[1] = t, c[2] = p; break;
        case 1: c[0] = q, c[1] = v, c[2] = p; break;
        case 2: c[0] = p, c[1] = v, c[2] = t; break;
        case 3: c[0] = p, c[1] = q, c[2] = v; break;
        case 4: c[0] = t, c[1] = p, c[2] = v; break;
        default: c[0] = v, c[1] = p, c[2] = q; break;
    }
    for (int k = 0; k < 3; ++k) rgb[k] = static_cast<unsigned char>(std::lround(255.0 * std::clamp(c[k], 0.0, 1.0)));
}

}  // namespace

void write_ppm(std::ostream& out, const Raster& raster) {
    const auto& vp = raster.viewport;
    out << "P6\n" << vp.w << ' ' << vp.h << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(vp.w) * 3);
    for (int j = 0; j < vp.h; ++j) {
        for (int i = 0; i < vp.w; ++i) {
            unsigned char* px = &row[static_cast<std::size_t>(i) * 3];
            const std::size_t k = static_cast<std::size_t>(j) * vp.w + i;
            const int l = raster.labels[k];
            if (l == kJuliaProxy) {
                px[0] = px[1] = px[2] = 0;
                continue;
            }
            const double v = 0.3 + 0.7 / (1.0 + raster.iterations[k] / 8.0);
            hsv(0.6 + 0.381966 * l, 0.65, v, px);
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
}

}  // namespace jm
