#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "jm/boettcher.hpp"
#include "jm/curves.hpp"
#include "jm/portrait.hpp"

namespace jm {

class Unsupported : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NoRealization : public std::runtime_error {
public:
    NoRealization(const std::string& what, std::vector<double> best) : std::runtime_error(what), best_(std::move(best)) {}
    const std::vector<double>& best_residuals() const { return best_; }

private:
    std::vector<double> best_;
};

struct MatingSpec {
    RationalMap f = RationalMap::polynomial({0.0, 0.0, 1.0});
    RationalMap g = RationalMap::polynomial({0.0, 0.0, 1.0});
    SpherePoint f_center{0.0};
    SpherePoint g_center{0.0};
    int d0 = 2;
    int k = 1;
};

/// Portraits of f and g with boundary angles on their marked basins, merged
/// across the gluing.
CriticalOrbitPortrait mated_portrait(const MatingSpec& spec);

/// Angle of a merged node in the basin of the other fixed critical point of
/// f (side 'f') or g (side 'g'), the basin that survives into the mating.
struct ExternalAngle {
    std::string label;  // merged node
    char side = 'f';
    std::vector<Angle> angles;  // all rays landing there (several at a critical point)
};

std::vector<ExternalAngle> external_angles(const MatingSpec& spec, const CriticalOrbitPortrait& merged);

/// R^steps(c_source) = target, target being another free critical point, an
/// earlier iterate of the same point, 0 or infinity.
struct OrbitEquation {
    enum class Target { Critical, Iterate, Zero, Infinity };
    int source = 0;
    int steps = 1;
    Target target = Target::Iterate;
    int index = 0;  // critical slot or iterate count
    std::string text;
};

/// z^m0 P(z) / Q(z) with P monic of degree D - m0 and deg Q = D - m_inf: the
/// fixed critical points sit at 0 and infinity, and the first free critical
/// point is pinned at 1, which fixes q0 linearly.
struct MatingFamily {
    int degree = 0;
    int m0 = 1;
    int m_inf = 1;
    std::string zero_label, infinity_label;
    std::vector<std::string> critical_labels;  // free critical nodes, [0] is pinned at 1
    std::vector<OrbitEquation> equations;
    std::vector<std::string> unknowns;         // p0.. then q1..
    std::string normalization;

    int p_degree() const { return degree - m0; }
    int q_degree() const { return degree - m_inf; }
    std::size_t unknown_count() const { return unknowns.size(); }
    RationalMap instantiate(std::span<const Complex> values) const;
    /// Free critical points of a member, ordered like critical_labels.
    std::vector<Complex> free_critical_points(const RationalMap& r) const;
    std::string describe() const;
};

MatingFamily build_family(const CriticalOrbitPortrait& merged);

/// Per-equation differences; relative ones are scaled by the larger modulus.
std::vector<Complex> equation_residuals(const MatingFamily& family, const RationalMap& r,
                                        std::span<const Complex> critical, bool relative = false);

struct RealizedMating {
    RationalMap R = RationalMap::polynomial({0.0, 0.0, 1.0});
    std::vector<Complex> params;
    std::vector<Complex> critical;
    std::vector<double> residuals;  // absolute, per equation
    std::string normalization;
    CriticalOrbitPortrait portrait;                          // portrait_of(R)
    std::vector<std::pair<std::string, int>> portrait_match;  // merged label -> node of portrait
    int seed_index = 0;
    // Some external angle of every f and g node lands at the matched node of
    // R, up to the root-of-unity freedom of the charts at 0 and infinity.
    // A ranking hint only: it does not single out one gluing.
    bool external_angles_match = false;

    double max_residual() const;
};

struct RealizeOptions {
    double tol = 1e-12;     // Newton target
    double accept = 1e-10;  // residual required of a returned solution
    double margin = 1e-6;   // separation of distinct portrait nodes
    double dedup = 1e-8;
    double box = 4.0;       // grid seeds on [-box, box]^2 per unknown
    int per_axis = 9;
    int random_seeds = 256;
    std::uint64_t seed = 1;
    int threads = 0;
};

struct RealizeReport {
    CriticalOrbitPortrait merged;
    MatingFamily family;
    std::vector<RealizedMating> solutions;  // in seed order
    std::vector<ExternalAngle> external;
    std::optional<std::size_t> primary;     // first with external_angles_match, else the first
    std::vector<std::string> notes;
    int seeds = 0;
    int converged_seeds = 0;
    double best_residual = 0.0;
};

/// Grid seeds plus deterministic random ones.
std::vector<std::vector<Complex>> realizer_seeds(std::size_t unknowns, const RealizeOptions& opts);

RealizeReport realize(const CriticalOrbitPortrait& merged, const std::vector<std::vector<Complex>>& seeds,
                      const RealizeOptions& opts = {}, const std::vector<ExternalAngle>& external = {});
RealizeReport realize(const MatingSpec& spec, const RealizeOptions& opts = {});

struct DegreeCheck {
    std::string label;
    int expected = 0;
    int measured = 0;
};

struct RealizationReport {
    int degree = 0;
    int preimage_samples = 0;
    int preimage_failures = 0;      // samples without exactly D preimages
    double preimage_residual = 0.0;
    double max_relation_residual = 0.0;
    std::vector<DegreeCheck> local_degrees;
    bool portrait_isomorphic = false;
    std::vector<int> expected_cycles;  // periods of critical cycles in the merged portrait
    std::vector<int> found_cycles;     // the same read off portrait_of(R)
    double basin_fraction = 0.0;       // grid samples captured by those cycles
    double perturbed_residual = 0.0;   // after moving one coefficient by 1e-3
    double tol = 0.0;

    bool degrees_ok() const;
    bool ok() const;
};

RealizationReport verify_realization(const RealizedMating& rm, const MatingFamily& family,
                                     const CriticalOrbitPortrait& merged, double tol = 1e-10,
                                     std::uint64_t seed = 1);

/// Postcritical points of R labelled by the merged portrait. Nodes on the
/// glued circle carry their f-side angle as the parameter on T; a node
/// reached by an f orbit counts in P_f.
MarkedPoints mating_marked_points(const RealizedMating& rm, const CriticalOrbitPortrait& merged);

}  // namespace jm
