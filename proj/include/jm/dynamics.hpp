#pragma once

#include <complex>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace jm {

using Complex = std::complex<double>;

/// Coefficient list in ascending powers: c[0] + c[1] z + c[2] z^2 + ...
using CoeffList = std::vector<Complex>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// A point of the Riemann sphere. Infinity is an explicit state, never a
/// large-magnitude sentinel.
class SpherePoint {
public:
    SpherePoint() = default;
    SpherePoint(Complex z);  // NOLINT(google-explicit-constructor)
    SpherePoint(double x) : SpherePoint(Complex(x, 0.0)) {}  // NOLINT

    static SpherePoint infinity();

    bool is_infinity() const { return infinite_; }
    bool is_finite() const { return !infinite_; }

    /// Finite value; throws std::logic_error at infinity.
    Complex value() const;

    /// Coordinate in the chart at infinity (1/z); zero at infinity.
    Complex inverted() const;

private:
    Complex z_{0.0, 0.0};
    bool infinite_ = false;
};

/// Chordal distance, normalised to [0, 1].
double chordal_distance(const SpherePoint& a, const SpherePoint& b);

std::string to_string(const SpherePoint& p);

namespace poly {

Complex eval(std::span<const Complex> c, Complex z);
CoeffList derivative(std::span<const Complex> c);
CoeffList add(std::span<const Complex> a, std::span<const Complex> b);
CoeffList sub(std::span<const Complex> a, std::span<const Complex> b);
CoeffList mul(std::span<const Complex> a, std::span<const Complex> b);
CoeffList scale(std::span<const Complex> a, Complex s);

/// Drops trailing coefficients below rel_tol * max|c| (exact zeros when rel_tol == 0).
CoeffList trim(CoeffList c, double rel_tol = 0.0);

/// Degree after trimming exact zeros; -1 for the zero polynomial.
int degree(std::span<const Complex> c);

/// Coefficients of p(z + shift).
CoeffList taylor_shift(std::span<const Complex> c, Complex shift);

}  // namespace poly

class RootFindingError : public std::runtime_error {
public:
    RootFindingError(const std::string& what, std::vector<double> residuals)
        : std::runtime_error(what), residuals_(std::move(residuals)) {}
    const std::vector<double>& residuals() const { return residuals_; }

private:
    std::vector<double> residuals_;
};

struct Root {
    Complex z;
    int multiplicity = 1;
    double residual = 0.0;
    bool ill_conditioned = false;  // cluster multiplicity is an estimate
};

struct RootOptions {
    double tol = 1e-13;
    int max_iter = 500;
    double cluster_radius = 1e-6;
};

/// All roots of a polynomial, clustered with summed multiplicity.
/// Companion-matrix eigenvalues seed an Aberth-Ehrlich iteration, followed
/// by one Newton polish per root.
std::vector<Root> polynomial_roots(std::span<const Complex> coeffs, const RootOptions& opts = {});

/// Rational map num/den of the sphere. Polynomials have a constant denominator.
class RationalMap {
public:
    RationalMap(CoeffList num, CoeffList den);

    static RationalMap polynomial(CoeffList coeffs);

    const CoeffList& num() const { return num_; }
    const CoeffList& den() const { return den_; }
    int num_degree() const { return static_cast<int>(num_.size()) - 1; }
    int den_degree() const { return static_cast<int>(den_.size()) - 1; }
    int degree() const { return std::max(num_degree(), den_degree()); }
    bool is_polynomial() const { return den_degree() == 0; }

    SpherePoint operator()(const SpherePoint& z) const;

    /// Derivative at a finite non-pole point.
    Complex derivative(Complex z) const;

    /// Numerator of the derivative, N'D - ND', with rounding residue trimmed.
    CoeffList wronskian() const;

    /// Map conjugated by z -> 1/z, i.e. 1/R(1/z).
    RationalMap inverted() const;

    /// Map conjugated by z -> z + shift, i.e. R(z + shift) - shift.
    RationalMap recentered(Complex shift) const;

private:
    CoeffList num_;
    CoeffList den_;
};

SpherePoint eval(const RationalMap& map, const SpherePoint& z);

/// True when a root of den lies within tol of a root of num.
bool has_common_root(const RationalMap& map, double tol = 1e-7);

struct CriticalPoint {
    SpherePoint point;
    int local_degree = 2;
};

std::vector<CriticalPoint> critical_points(const RationalMap& map);

struct PreimageSet {
    std::vector<Root> finite;
    int at_infinity = 0;  // multiplicity of infinity as a preimage
};

/// Preimages with cluster multiplicities; degree drop is reported at infinity.
PreimageSet preimage_roots(const RationalMap& map, const SpherePoint& w);

/// All D preimages of w, repeated according to multiplicity.
std::vector<SpherePoint> preimages(const RationalMap& map, const SpherePoint& w);

struct OrbitRecord {
    std::vector<SpherePoint> points;
    int preperiod = 0;
    int period = 1;
};

/// z, R(z), ..., R^n(z).
std::vector<SpherePoint> forward_orbit(const RationalMap& map, const SpherePoint& z, int n);

struct BasinTest {
    int max_iter = 200;
    double radius = 1e-6;  // chordal distance to the center counted as captured
};

/// True when the forward orbit of z reaches the attracting point center.
bool attracted_to(const RationalMap& map, const SpherePoint& z, const SpherePoint& center, const BasinTest& t = {});

/// Probes a small circle around a finite point z: true when some probes are
/// attracted to center and some are not.
bool on_basin_boundary(const RationalMap& map, Complex z, const SpherePoint& center, double probe_radius = 1e-4,
                       int probes = 64, const BasinTest& t = {});

// ---------------------------------------------------------------------------
// Damped Newton for small nonlinear systems.

using RealVector = Eigen::VectorXd;
using ResidualFn = std::function<RealVector(const RealVector&)>;

enum class NewtonStatus { Converged, MaxIterations, SingularJacobian, NonFinite };

const char* to_string(NewtonStatus s);

struct NewtonOptions {
    double tol = 1e-12;
    int max_iter = 100;
    double fd_step = 1e-7;
    int max_halvings = 40;
};

struct NewtonResult {
    RealVector x;
    double residual_norm = 0.0;
    int iterations = 0;
    NewtonStatus status = NewtonStatus::MaxIterations;
    std::string diagnostic;

    bool converged() const { return status == NewtonStatus::Converged; }
};

/// Newton's method with a central-difference Jacobian. The step is halved
/// while it fails to reduce the residual norm. On failure the best iterate
/// seen is returned together with a status.
NewtonResult newton_solve(const ResidualFn& residual, RealVector seed, const NewtonOptions& opts = {});

RealVector pack(std::span<const Complex> z);
std::vector<Complex> unpack(const RealVector& v);

}  // namespace jm
