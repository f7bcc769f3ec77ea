#include "jm/gluing.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "jm/parallel.hpp"

namespace jm {

namespace {

double wrap_turns(double t) {
    t = std::fmod(t, 1.0);
    return t < 0 ? t + 1.0 : t;
}

// Representative of t in (-1/2, 1/2].
double signed_turns(double t) {
    t = wrap_turns(t);
    return t > 0.5 ? t - 1.0 : t;
}

double turns_of(Complex w) { return wrap_turns(std::arg(w) / kTwoPi); }

Complex unit(Complex w) { return w / std::abs(w); }

}  // namespace

double GluingMap::partner_angle(double theta_g) const { return wrap_turns(std::arg(alpha_) / kTwoPi - theta_g); }

double GluingMap::inverse_partner_angle(double theta_f) const { return partner_angle(theta_f); }

SpherePoint GluingMap::apply(const SpherePoint& x) const {
    const Complex psi = g_->value(x);
    if (psi == Complex(0.0)) throw std::invalid_argument("GluingMap::apply: x is the center of the g basin");
    return f_->inverse((1.0 - epsilon_) * alpha_ * std::conj(unit(psi)));
}

SpherePoint GluingMap::apply_inverse(const SpherePoint& y) const {
    const Complex phi = f_->value(y);
    if (phi == Complex(0.0)) throw std::invalid_argument("GluingMap::apply_inverse: y is the center of the f basin");
    return g_->inverse((1.0 - epsilon_) * std::conj(unit(phi) / alpha_));
}

SpherePoint GluingMap::f_boundary(double theta_f) const {
    return f_->inverse(std::polar(1.0 - epsilon_, kTwoPi * theta_f));
}

SpherePoint GluingMap::g_boundary(double theta_g) const {
    return g_->inverse(std::polar(1.0 - epsilon_, kTwoPi * theta_g));
}

GluingMap build_gluing(const BoettcherChart& chart_f, const BoettcherChart& chart_g, int k, int n,
                       const GluingOptions& opts) {
    if (chart_f.d0() != chart_g.d0())
        throw std::invalid_argument("build_gluing: basin degrees differ (" + std::to_string(chart_f.d0()) + " vs " +
                                    std::to_string(chart_g.d0()) + ")");
    const int d0 = chart_f.d0();
    if (k < 1 || k > std::max(1, d0 - 1))
        throw std::invalid_argument("build_gluing: k must lie in [1, d0 - 1]");
    GluingMap gm;
    gm.f_ = std::make_shared<const BoettcherChart>(chart_f);
    gm.g_ = std::make_shared<const BoettcherChart>(chart_g);
    gm.k_ = k;
    gm.epsilon_ = opts.epsilon;
    // k = d0 - 1 (always the case for d0 = 2) gives exactly 1.
    const int m = std::max(1, d0 - 1);
    gm.alpha_ = opts.alpha ? *opts.alpha : (k % m == 0 ? Complex(1.0) : std::polar(1.0, kTwoPi * (k % m) / m));

    const auto bp = boundary_parametrization(chart_g, n, opts.epsilon, 1);
    gm.angle_g_ = bp.angles;
    gm.x_ = bp.points;
    gm.y_.reserve(gm.x_.size());
    gm.angle_f_.reserve(gm.x_.size());
    for (const auto& x : gm.x_) {
        gm.y_.push_back(gm.apply(x));
        gm.angle_f_.push_back(turns_of(chart_f.value(gm.y_.back())));
    }

    double total = 0.0;
    for (std::size_t j = 0; j < gm.angle_f_.size(); ++j) {
        const double step = signed_turns(gm.angle_f_[(j + 1) % gm.angle_f_.size()] - gm.angle_f_[j]);
        if (!(step < 0.0)) {
            std::ostringstream os;
            os << "build_gluing: f-angle does not decrease after sample " << j << " (step " << step << " turns)";
            throw NotHomeomorphismAtResolution(os.str(), static_cast<int>(j));
        }
        total += step;
    }
    if (std::abs(total + 1.0) > 1e-6)
        throw NotHomeomorphismAtResolution("build_gluing: angle winding " + std::to_string(total) + ", expected -1",
                                           -1);
    return gm;
}

GluingReport verify_gluing(const GluingMap& gm, double tol, int threads) {
    GluingReport r;
    r.tol = tol;
    r.alpha = gm.alpha();
    r.k = gm.k();
    r.d0 = gm.d0();
    r.exponent_note = "root of unity exp(2 pi i k/(d0-1)); the printed d-1 is read as d0-1";

    const std::size_t n = gm.size();
    const auto& af = gm.angles_f();
    r.monotone = true;
    r.monotonicity_margin = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double step = signed_turns(af[(j + 1) % n] - af[j]);
        r.angle_winding += step;
        if (!(step < 0.0)) r.monotone = false;
        r.monotonicity_margin = std::min(r.monotonicity_margin, -step);
    }

    const BoettcherChart& cf = gm.chart_f();
    double turns = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const Complex a = cf.to_local(gm.points_f()[j]);
        const Complex b = cf.to_local(gm.points_f()[(j + 1) % n]);
        turns += std::arg(b / a) / kTwoPi;
    }
    r.polygon_winding = static_cast<int>(std::lround(turns));

    // Phi(g(x)) against the re-clamped f(Phi(x)).
    std::vector<double> defect(n, 0.0);
    parallel_for(n, threads, [&](std::size_t j) {
        try {
            const SpherePoint lhs = gm.apply(gm.chart_g().map()(gm.points_g()[j]));
            const Complex phi = cf.value(cf.map()(gm.points_f()[j]));
            const SpherePoint rhs = cf.inverse((1.0 - gm.epsilon()) * unit(phi));
            defect[j] = std::abs(cf.to_local(lhs) - cf.to_local(rhs));
        } catch (const std::exception&) {
            defect[j] = std::numeric_limits<double>::infinity();
        }
    });
    for (const double d : defect) r.equivariance_defect = std::max(r.equivariance_defect, d);
    r.equivariant = r.equivariance_defect < tol;
    return r;
}

void write_gluing_csv(std::ostream& out, const GluingMap& gm) {
    out << "angle_g,angle_f\n";
    out.precision(17);
    for (std::size_t j = 0; j < gm.size(); ++j) out << gm.angles_g()[j] << ',' << gm.angles_f()[j] << '\n';
}

// ---------------------------------------------------------------------------

ModelPoint ModelPoint::on_circle(double angle) { return {Side::OnCircle, SpherePoint(), wrap_turns(angle)}; }

std::string to_string(const ModelPoint& p) {
    switch (p.side) {
        case ModelPoint::Side::Outside: return "outside " + to_string(p.z);
        case ModelPoint::Side::Inside: return "inside " + to_string(p.z);
        case ModelPoint::Side::OnCircle: break;
    }
    std::ostringstream os;
    os << "circle " << p.angle;
    return os.str();
}

TopologicalMatingModel::TopologicalMatingModel(std::shared_ptr<const GluingMap> gluing, double collar)
    : gluing_(std::move(gluing)), collar_(collar) {
    if (!gluing_) throw std::invalid_argument("TopologicalMatingModel: no gluing");
    for (const auto& y : gluing_->points_f()) poly_f_.push_back(gluing_->chart_f().to_local(y));
    for (const auto& x : gluing_->points_g()) poly_g_.push_back(gluing_->chart_g().to_local(x));
}

namespace {

bool below_level(const BoettcherChart& chart, const std::vector<Complex>& poly, double eps, const SpherePoint& z) {
    const Complex u = chart.to_local(z);
    if (!std::isfinite(std::abs(u))) return false;
    if (!point_in_polygon(poly, u)) return false;
    return std::abs(chart.local_value(u)) < 1.0 - eps;
}

}  // namespace

bool TopologicalMatingModel::in_glued_f(const SpherePoint& z) const {
    return below_level(gluing_->chart_f(), poly_f_, gluing_->epsilon(), z);
}

bool TopologicalMatingModel::in_glued_g(const SpherePoint& z) const {
    return below_level(gluing_->chart_g(), poly_g_, gluing_->epsilon(), z);
}

double TopologicalMatingModel::collar_radius(const BoettcherChart& chart, const SpherePoint& w, double* angle) const {
    const Complex v = chart.value(w);
    const double r = std::abs(v);
    if (r < 1.0 - collar_) {
        std::ostringstream os;
        os << "eval_model: image at Böttcher radius " << r << " lies below the collar 1 - " << collar_;
        throw ResolutionExceeded(os.str(), r);
    }
    *angle = turns_of(v);
    return r;
}

ModelPoint TopologicalMatingModel::eval(const ModelPoint& p) const {
    const GluingMap& gm = *gluing_;
    switch (p.side) {
        case ModelPoint::Side::Outside: {
            const SpherePoint w = f()(p.z);
            if (!in_glued_f(w)) return ModelPoint::outside(w);
            // Phi^{-1}(f(z)): the collar of D_f is carried onto T.
            double theta = 0.0;
            collar_radius(gm.chart_f(), w, &theta);
            return ModelPoint::on_circle(theta);
        }
        case ModelPoint::Side::Inside: {
            const SpherePoint w = g()(p.z);
            if (!in_glued_g(w)) return ModelPoint::inside(w);
            double theta = 0.0;
            collar_radius(gm.chart_g(), w, &theta);
            return ModelPoint::on_circle(gm.partner_angle(theta));
        }
        case ModelPoint::Side::OnCircle: break;
    }
    const SpherePoint w = f()(gm.f_boundary(p.angle));
    return ModelPoint::on_circle(turns_of(gm.chart_f().value(w)));
}

double TopologicalMatingModel::distance(const ModelPoint& a, const ModelPoint& b) const {
    using Side = ModelPoint::Side;
    if (a.side == Side::Inside && b.side == Side::Inside) return chordal_distance(a.z, b.z);
    const auto to_f = [&](const ModelPoint& p) -> SpherePoint {
        switch (p.side) {
            case Side::Outside: return p.z;
            case Side::OnCircle: return gluing_->f_boundary(p.angle);
            case Side::Inside: break;
        }
        const BoettcherChart& cg = gluing_->chart_g();
        if (!cg.in_basin(p.z)) throw ResolutionExceeded("distance: inside point is far from the circle", 1.0);
        double theta = 0.0;
        collar_radius(cg, p.z, &theta);
        return gluing_->apply(p.z);
    };
    return chordal_distance(to_f(a), to_f(b));
}

ModelPoint eval_model(const TopologicalMatingModel& model, const ModelPoint& p) { return model.eval(p); }

CircleModelReport check_circle_model(const TopologicalMatingModel& model, int n, int threads) {
    const GluingMap& gm = model.gluing();
    const double half = 1.0 - 0.5 * gm.epsilon();
    std::vector<double> circle(static_cast<std::size_t>(n)), cont(static_cast<std::size_t>(n));
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t j) {
        const double theta = static_cast<double>(j) / n;
        try {
            const ModelPoint e = model.eval(ModelPoint::on_circle(theta));
            const double d = wrap_turns(e.angle - gm.d0() * theta);
            circle[j] = std::min(d, 1.0 - d);
            // Between the level curve and the boundary on either side.
            const ModelPoint out = ModelPoint::outside(gm.chart_f().inverse(std::polar(half, kTwoPi * theta)));
            const ModelPoint in = ModelPoint::inside(
                gm.chart_g().inverse(std::polar(half, kTwoPi * gm.inverse_partner_angle(theta))));
            cont[j] = model.distance(model.eval(out), model.eval(in));
        } catch (const std::exception&) {
            circle[j] = cont[j] = std::numeric_limits<double>::infinity();
        }
    });
    CircleModelReport r;
    r.samples = n;
    for (std::size_t j = 0; j < circle.size(); ++j) {
        r.circle_error = std::max(r.circle_error, circle[j]);
        r.continuity_error = std::max(r.continuity_error, cont[j]);
    }
    return r;
}

}  // namespace jm
