#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "jm/boettcher.hpp"

namespace jm {

class NotHomeomorphismAtResolution : public std::runtime_error {
public:
    NotHomeomorphismAtResolution(const std::string& what, int index) : std::runtime_error(what), index_(index) {}
    /// Sample after which the angle table stops decreasing (-1 for winding).
    int index() const { return index_; }

private:
    int index_;
};

class ResolutionExceeded : public std::runtime_error {
public:
    ResolutionExceeded(const std::string& what, double radius) : std::runtime_error(what), radius_(radius) {}
    /// Böttcher radius of the point that fell outside the collar.
    double radius() const { return radius_; }

private:
    double radius_;
};

struct GluingOptions {
    double epsilon = 1e-4;
    // Replaces the root-of-unity factor. Only meant for negative controls;
    // monotonicity is still checked.
    std::optional<Complex> alpha;
};

/// Sampled boundary correspondence x -> Phi(x) from the g-basin boundary to
/// the f-basin boundary. Both sides live on the level curves at Böttcher
/// radius 1 - epsilon.
class GluingMap {
public:
    const BoettcherChart& chart_f() const { return *f_; }
    const BoettcherChart& chart_g() const { return *g_; }
    int k() const { return k_; }
    int d0() const { return f_->d0(); }
    double epsilon() const { return epsilon_; }
    Complex alpha() const { return alpha_; }

    std::size_t size() const { return angle_g_.size(); }
    const std::vector<double>& angles_g() const { return angle_g_; }
    const std::vector<double>& angles_f() const { return angle_f_; }  // measured through phi
    const std::vector<SpherePoint>& points_g() const { return x_; }
    const std::vector<SpherePoint>& points_f() const { return y_; }

    /// f-side angle (turns) glued to the g-side angle theta.
    double partner_angle(double theta_g) const;
    double inverse_partner_angle(double theta_f) const;

    /// Phi at a g-basin point: the reciprocal of psi(x) rotated by alpha and
    /// clamped back to radius 1 - epsilon.
    SpherePoint apply(const SpherePoint& x) const;
    SpherePoint apply_inverse(const SpherePoint& y) const;

    /// Proxy boundary points at a given angle.
    SpherePoint f_boundary(double theta_f) const;
    SpherePoint g_boundary(double theta_g) const;

private:
    friend GluingMap build_gluing(const BoettcherChart&, const BoettcherChart&, int, int, const GluingOptions&);

    std::shared_ptr<const BoettcherChart> f_, g_;
    int k_ = 1;
    double epsilon_ = 1e-4;
    Complex alpha_{1.0, 0.0};
    std::vector<double> angle_g_, angle_f_;
    std::vector<SpherePoint> x_, y_;
};

/// Samples psi^{-1}((1 - eps) e^{2 pi i j/n}) and glues each sample to
/// phi^{-1}((1 - eps) alpha / conj-direction). The measured f-angles must
/// decrease strictly with total winding -1.
GluingMap build_gluing(const BoettcherChart& chart_f, const BoettcherChart& chart_g, int k, int n,
                       const GluingOptions& opts = {});

struct GluingReport {
    bool monotone = false;
    double monotonicity_margin = 0.0;  // smallest decrease between neighbours, turns
    double angle_winding = 0.0;        // summed angle steps, turns
    int polygon_winding = 0;           // of Phi(boundary of g) around the f center
    double equivariance_defect = 0.0;  // max |Phi(g(x)) - f(Phi(x))|, f local coordinates
    bool equivariant = false;
    double tol = 0.0;
    Complex alpha;
    int k = 1;
    int d0 = 2;
    std::string exponent_note;

    bool ok() const { return monotone && polygon_winding == -1 && equivariant; }
};

GluingReport verify_gluing(const GluingMap& gluing, double tol, int threads = 0);

/// angle_g,angle_f rows.
void write_gluing_csv(std::ostream& out, const GluingMap& gluing);

// ---------------------------------------------------------------------------
// Circle model: outside T is the f-plane minus D_f, inside T the g-plane
// minus D_g, and T itself is parametrized by the f-side angle.

struct ModelPoint {
    enum class Side { Outside, Inside, OnCircle };
    Side side = Side::OnCircle;
    SpherePoint z;       // plane point for Outside and Inside
    double angle = 0.0;  // turns, f-side angle for OnCircle

    static ModelPoint outside(const SpherePoint& z) { return {Side::Outside, z, 0.0}; }
    static ModelPoint inside(const SpherePoint& z) { return {Side::Inside, z, 0.0}; }
    static ModelPoint on_circle(double angle);
};

std::string to_string(const ModelPoint& p);

class TopologicalMatingModel {
public:
    /// Images that fall into a glued basin at Böttcher radius below
    /// 1 - collar are beyond what the boundary correspondence resolves.
    explicit TopologicalMatingModel(std::shared_ptr<const GluingMap> gluing, double collar = 1e-2);

    const GluingMap& gluing() const { return *gluing_; }
    const RationalMap& f() const { return gluing_->chart_f().map(); }
    const RationalMap& g() const { return gluing_->chart_g().map(); }
    double collar() const { return collar_; }

    /// Membership in the glued basins, cut off at the level curve.
    bool in_glued_f(const SpherePoint& z) const;
    bool in_glued_g(const SpherePoint& z) const;

    ModelPoint eval(const ModelPoint& p) const;

    /// Chordal distance after carrying both points to the f-plane (T goes to
    /// the f-side level curve, inside points near T through Phi).
    double distance(const ModelPoint& a, const ModelPoint& b) const;

private:
    double collar_radius(const BoettcherChart& chart, const SpherePoint& w, double* angle) const;

    std::shared_ptr<const GluingMap> gluing_;
    double collar_;
    std::vector<Complex> poly_f_, poly_g_;  // level curves in local coordinates
};

ModelPoint eval_model(const TopologicalMatingModel& model, const ModelPoint& p);

struct CircleModelReport {
    double circle_error = 0.0;      // max turns between eval on T and d0 * angle
    double continuity_error = 0.0;  // max distance between the two one-sided images
    int samples = 0;
};

/// Samples T at n angles: eval there against d0 * angle, and the images of
/// points just outside and just inside T against each other.
CircleModelReport check_circle_model(const TopologicalMatingModel& model, int n, int threads = 0);

}  // namespace jm
