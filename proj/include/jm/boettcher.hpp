#pragma once

#include <stdexcept>
#include <vector>

#include "jm/dynamics.hpp"
#include "jm/portrait.hpp"

namespace jm {

class OutsideBasin : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class PrecisionLoss : public std::runtime_error {
public:
    PrecisionLoss(const std::string& what, double achieved) : std::runtime_error(what), achieved_(achieved) {}
    /// Last good radius for inverse continuation, achieved residual otherwise.
    double achieved() const { return achieved_; }

private:
    double achieved_;
};

class NotJordanAtResolution : public std::runtime_error {
public:
    NotJordanAtResolution(const std::string& what, int segment_a, int segment_b)
        : std::runtime_error(what), a_(segment_a), b_(segment_b) {}
    int segment_a() const { return a_; }
    int segment_b() const { return b_; }

private:
    int a_, b_;
};

struct ChartOptions {
    int root_index = 0;        // which (d0-1)-th root of the leading coefficient
    BasinTest basin{};
    int cut_samples = 512;     // boundary samples used to place the log branch cut
    double cut_epsilon = 1e-3;
};

/// Böttcher coordinate of the immediate basin of a superattracting fixed
/// point. All internal work happens in a local coordinate u with the center
/// at u = 0 (u = z - c, or u = 1/z when the center is infinity).
class BoettcherChart {
public:
    BoettcherChart(RationalMap map, SpherePoint center, const ChartOptions& opts = {});

    const RationalMap& map() const { return map_; }
    const RationalMap& local_map() const { return h_; }
    const SpherePoint& center() const { return center_; }
    int d0() const { return d0_; }
    Complex lead() const { return lead_; }
    Complex root() const { return lambda_; }
    int root_index() const { return root_index_; }
    double cut_angle() const { return cut_; }
    double core_radius() const { return core_; }

    Complex to_local(const SpherePoint& z) const;
    SpherePoint from_local(Complex u) const;

    bool in_basin(const SpherePoint& z) const;

    /// phi(z); throws OutsideBasin when the orbit does not reach the core.
    Complex value(const SpherePoint& z) const;
    Complex local_value(Complex u) const;

    /// phi^{-1}(w) for |w| < 1; throws PrecisionLoss when the radial
    /// continuation stalls.
    SpherePoint inverse(Complex w) const;
    Complex local_inverse(Complex w) const;

    /// |phi(f(z)) - phi(z)^d0|.
    double functional_residual(const SpherePoint& z) const;

private:
    Complex ratio(Complex u) const;  // h(u) / (lead u^d0)
    Complex log_ratio(Complex u) const;
    Complex core_value(Complex u) const;
    Complex core_inverse(Complex v) const;
    Complex pull_back(Complex target, Complex seed) const;
    void place_cut(const ChartOptions& opts);

    RationalMap map_;
    SpherePoint center_;
    RationalMap h_;
    CoeffList shifted_num_;  // num of h divided by u^d0
    int d0_ = 2;
    Complex lead_;
    Complex lambda_;
    int root_index_ = 0;
    double cut_ = kPi;  // log branch: arguments in (cut - 2pi, cut]
    double core_ = 0.0;
    BasinTest basin_;
    std::vector<std::pair<Complex, int>> critical_local_;  // finite critical points of h other than 0, with local degree
};

struct BoundaryParametrization {
    std::vector<double> angles;       // turns, j/n
    std::vector<SpherePoint> points;  // phi^{-1}((1 - eps) e^{2 pi i angle})
    double epsilon = 0.0;
};

/// Samples the radius-(1-eps) level curve and checks it is a simple polygon
/// in local coordinates (counterclockwise there).
BoundaryParametrization boundary_parametrization(const BoettcherChart& chart, int n, double epsilon,
                                                 int threads = 0);

/// Index pair of two crossing edges of the closed polygon, if any.
std::optional<std::pair<int, int>> polygon_self_intersection(const std::vector<Complex>& poly);

/// Signed area of a closed polygon (positive when counterclockwise).
double signed_area(const std::vector<Complex>& poly);

/// Even-odd ray casting. Points on an edge may land on either side.
bool point_in_polygon(const std::vector<Complex>& poly, Complex p);

struct EquivarianceDefect {
    double max_distance = 0.0;  // |f(p_j) - p_{d0 j}| in local coordinates
    double max_angle = 0.0;     // turns: arg phi(f(p_j)) against d0 * angle_j
};

/// Pushes each boundary sample through the map and compares it with the
/// sample at d0 times its angle (n must be divisible appropriately: indices
/// are taken mod n).
EquivarianceDefect boundary_equivariance(const BoettcherChart& chart, const BoundaryParametrization& bp);

/// Whether the internal ray at the given angle lands at z: its point at
/// radius 1 - eps is close to z, or (slow landing at critical points) keeps
/// approaching z geometrically as eps shrinks.
bool ray_lands_at(const BoettcherChart& chart, double turns, const SpherePoint& z, double epsilon = 1e-6);

/// Fills boundary_angle for the nodes of a portrait of chart.map() that land
/// on the boundary of the marked immediate basin. Periodic nodes are matched
/// against the angles fixed by their period, preimages against the d0
/// preimage angles of their image's angle.
void annotate_boundary_angles(CriticalOrbitPortrait& portrait, const BoettcherChart& chart, double epsilon = 1e-6);

}  // namespace jm
