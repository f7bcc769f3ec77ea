#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "jm/dynamics.hpp"

namespace jm {

class AmbiguousMembership : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class LiftAmbiguous : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The circle T as a closed counterclockwise polygon around center. Vertex j
/// carries the parameter j/n (turns), so T(t) is piecewise linear in t.
class Interface {
public:
    /// Unit circle sampled at n points.
    static Interface circle(int n = 4096);
    explicit Interface(std::vector<Complex> samples, Complex center = 0.0);

    std::size_t size() const { return pts_.size(); }
    const std::vector<Complex>& points() const { return pts_; }
    Complex center() const { return center_; }
    Complex at(double t) const;
    bool inside(Complex z) const;
    double distance(Complex z) const;

    struct Crossing {
        double s = 0.0;  // position along the queried segment, in [0, 1]
        double t = 0.0;  // parameter on T
        Complex point;
    };
    /// Intersections of the segment [a, b] with T, sorted by s.
    std::vector<Crossing> crossings(Complex a, Complex b) const;

    /// Vertices of T with parameters strictly inside the counterclockwise
    /// arc from t0 to t1, in that order.
    std::vector<Complex> arc(double t0, double t1) const;

private:
    std::vector<std::size_t> cells_near(Complex a, Complex b) const;

    std::vector<Complex> pts_;
    Complex center_;
    // Uniform bucket grid over the bounding box, edge indices per cell.
    Complex lo_, hi_;
    int grid_ = 1;
    std::vector<std::vector<std::size_t>> buckets_;
};

/// Winding number of a closed polygon around z.
int winding_number(const std::vector<Complex>& poly, Complex z);
double distance_to_polygon(const std::vector<Complex>& poly, Complex z);

struct PolygonalCurve {
    std::vector<Complex> vertices;  // closed, last joins first
    bool transversal = true;
};

struct TypedSegment {
    enum class Side { P, R };  // outside T, inside T
    Side side = Side::P;
    std::vector<Complex> arc;  // both endpoints on T
    double t_start = 0.0, t_end = 0.0;
    // The chord I is the counterclockwise arc of T from chord_from to chord_to.
    double chord_from = 0.0, chord_to = 0.0;
    std::vector<Complex> region;  // arc followed by I back to the start

    bool chord_contains(double t) const;
};

struct Segmentation {
    std::vector<TypedSegment> segments;
    int K = 0;          // type P segments
    int perturbed = 0;  // vertices pushed off T
};

/// Cuts the curve at its crossings with T. I is the T-arc whose union with
/// the segment has winding number zero around the center (the puncture of
/// C*). A curve disjoint from T gives an empty segmentation.
Segmentation segment_curve(const PolygonalCurve& curve, const Interface& T);

/// A postcritical point: on T it carries its parameter there and membership
/// in D(sigma) is decided by that parameter.
struct MarkedPoint {
    std::string label;
    SpherePoint z;
    std::optional<double> t;
    char origin = 'f';  // 'f' or 'g'
    bool periodic = false;
    int image = -1;  // index of the image point
};

struct MarkedPoints {
    std::vector<MarkedPoint> points;

    std::vector<int> P_f() const;
    std::vector<int> P_g() const;
    std::vector<int> O() const;  // periodic points of P_f
};

/// x in D(sigma), by winding number (the arc I included). Throws
/// AmbiguousMembership within 1e-9 of the region boundary.
bool region_contains(const TypedSegment& seg, const MarkedPoint& x);
/// Crossing-count oracle for the same question, for points off T.
bool region_contains_raycast(const TypedSegment& seg, Complex z);

/// Number of type P segments whose region contains x.
int count_N(const MarkedPoint& x, const Segmentation& seg);

struct CurveClass {
    enum class Tag { Sigma, Pi, Lambda };
    Tag tag = Tag::Lambda;
    bool peripheral = false;
    int K = 0;
    std::vector<int> N;  // per marked point, zero outside P_f
};

std::string to_string(CurveClass::Tag tag);

/// Representative-level classification, no homotopy minimization.
CurveClass classify_curve(const PolygonalCurve& curve, const Interface& T, const MarkedPoints& marked);
CurveClass classify_curve(const Segmentation& seg, const PolygonalCurve& curve, const MarkedPoints& marked);
bool is_peripheral(const PolygonalCurve& curve, const MarkedPoints& marked);

struct LiftComponent {
    PolygonalCurve curve;
    int multiplicity = 1;  // times it covers the base curve
    double residual = 0.0;  // max |R(v) - base| over its vertices
};

struct PullbackOptions {
    double max_step = 0.0;  // base sampling; 0 picks 1/256 of the diameter
    double max_lift_step = 0.0;  // lifted edge length; 0 picks 1/256 of the base diameter
};

/// The full preimage as closed components, by lifting from every preimage of
/// the first vertex. The curve must stay off the critical values.
std::vector<LiftComponent> pullback_curve(const RationalMap& map, const PolygonalCurve& curve,
                                          const PullbackOptions& opts = {});

/// T in the plane of R with R(T(t)) = T(d0 t): lifts the d0-fold traversal
/// of the current curve starting at the preimage of T(0) closest to it,
/// until the samples stop moving.
struct InterfaceFit {
    Interface T = Interface::circle(16);
    int iterations = 0;
    double change = 0.0;         // last sup-norm move of the samples
    double marked_error = 0.0;   // max |T(t_x) - x| over marked points on T
    bool converged = false;
};

InterfaceFit invariant_interface(const RationalMap& map, int d0, const MarkedPoints& marked, int n = 2048,
                                 int max_iter = 200, double tol = 1e-10);

// ---------------------------------------------------------------------------
// Lemma harness

struct CurveHarnessRow {
    int index = 0;
    CurveClass cls;
    int components = 0;
    int nonperipheral = 0;
    int multiplicity_total = 0;
    bool ess_ok = true;
    std::vector<int> oo_lhs, oo_rhs;  // per point of P_f
    int oo_violations = 0;
    int oo_equalities = 0;
    std::string ev;  // "vacuous", "observed", "unminimized"
    std::string error;
};

struct HarnessReport {
    std::vector<CurveHarnessRow> rows;
    int degree = 0;
    int ev_depth = 0;
    int oo_violations = 0;
    int ess_violations = 0;
    int multiplicity_mismatches = 0;
    int ev_unminimized = 0;
    int failures = 0;  // curves skipped on errors

    bool ok() const { return oo_violations == 0 && multiplicity_mismatches == 0 && failures == 0; }
};

struct HarnessOptions {
    int ev_depth = -1;  // -1: smallest n with every f^n(P_f) periodic
    int threads = 0;
};

HarnessReport run_lemma_harness(const RationalMap& map, const Interface& T, const MarkedPoints& marked,
                                const std::vector<PolygonalCurve>& curves, const HarnessOptions& opts = {});

/// Random simple curves crossing T: star-shaped around a point, radius
/// modulated by a few harmonics, kept 1e-3 away from the marked points.
std::vector<PolygonalCurve> random_curves(const Interface& T, const MarkedPoints& marked, int count,
                                          std::uint64_t seed, int vertices = 256);

void write_curve_csv(std::ostream& out, const PolygonalCurve& curve);
PolygonalCurve read_curve_csv(std::istream& in);

}  // namespace jm
