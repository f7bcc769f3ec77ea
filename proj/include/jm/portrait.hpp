#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "jm/dynamics.hpp"

namespace jm {

/// Reduced fraction num/den in [0, 1), an angle measured in turns.
struct Angle {
    long num = 0;
    long den = 1;

    static Angle of(long num, long den);
    double turns() const { return static_cast<double>(num) / static_cast<double>(den); }
    friend bool operator==(const Angle&, const Angle&) = default;
};

std::string to_string(const Angle& a);

struct PortraitNode {
    std::vector<std::string> labels;  // more than one after identification in a merge
    SpherePoint point;
    int local_degree = 1;
    bool marked = false;
    int next = -1;
    std::optional<Angle> boundary_angle;  // position on the marked basin boundary, when it lies there

    const std::string& label() const { return labels.front(); }
    bool critical() const { return local_degree > 1; }
};

struct CriticalOrbitPortrait {
    std::vector<PortraitNode> nodes;
    int map_degree = 0;
    double min_separation = 0.0;  // smallest chordal distance between distinct nodes

    /// Sum of (local degree - 1).
    int budget() const;
    /// Degree a rational map with this budget must have.
    int implied_degree() const { return budget() / 2 + 1; }
    std::optional<int> marked() const;
    std::optional<int> find(const std::string& label) const;
    std::vector<int> critical_nodes() const;
};

struct OrbitShape {
    int preperiod = 0;
    int period = 1;
    friend bool operator==(const OrbitShape&, const OrbitShape&) = default;
};

/// Preperiod and period of the node's forward orbit inside the portrait graph.
OrbitShape orbit_shape(const CriticalOrbitPortrait& p, int node);

/// Indices of node, next(node), ... up to the first repetition.
std::vector<int> orbit_nodes(const CriticalOrbitPortrait& p, int node);

std::string describe(const CriticalOrbitPortrait& p);

/// Graph isomorphism preserving local degrees and marked flags.
bool isomorphic(const CriticalOrbitPortrait& a, const CriticalOrbitPortrait& b);

class NotPostcriticallyFinite : public std::runtime_error {
public:
    NotPostcriticallyFinite(const std::string& what, int max_steps) : std::runtime_error(what), max_steps_(max_steps) {}
    int max_steps() const { return max_steps_; }

private:
    int max_steps_;
};

struct PortraitOptions {
    int max_steps = 64;
    double tol = 1e-9;
    std::optional<SpherePoint> marked;  // center of the marked basin, if any
    std::string prefix;                 // prepended to every label
};

/// Tracks each critical orbit until it revisits a known point (confirmed one
/// step further). Critical nodes are labelled c1, c2, ... in the order of
/// critical_points(); the marked center is "m", infinity "inf"; iterates are
/// "<label>^k".
CriticalOrbitPortrait portrait_of(const RationalMap& map, const PortraitOptions& opts = {});

// ---------------------------------------------------------------------------
// Orbit relations such as "f^2(c) = f(c)" or "g^3(c) = g^{2}(c) != g(c)".

struct OrbitRelation {
    std::string map_symbol;
    std::string point;
    int lhs = 0;  // iterate counts
    int rhs = 0;
    std::vector<std::pair<int, int>> inequations;  // pairs (i, j) with f^i(c) != f^j(c)

    /// Exact orbit shape the relation prescribes (with the chained inequations).
    OrbitShape shape() const;
    std::string text;
};

/// Throws std::invalid_argument with the offending column on malformed input.
OrbitRelation parse_relation(const std::string& text);

// ---------------------------------------------------------------------------
// Families of maps with a prescribed critical relation.

/// "1", "-2/9", "0.5+1i", "-i".
Complex parse_complex(std::string s);

struct FamilySpec {
    std::string name;
    std::vector<std::string> params;
    // Coefficient recipe in ascending powers. Each entry is a complex literal
    // ("1", "-2/9", "0.5+1i") or a parameter with an optional real factor
    // ("a", "-3*a").
    std::vector<std::string> num;
    std::vector<std::string> den{"1"};
    SpherePoint marked{0.0};
    std::vector<SpherePoint> pinned{SpherePoint(0.0), SpherePoint::infinity()};
    std::vector<std::string> relations;
    std::string normalization;

    RationalMap instantiate(std::span<const Complex> values) const;
    /// Throws std::invalid_argument unless the system is square and parsable.
    void validate() const;
};

struct FamilySolution {
    std::vector<Complex> params;
    RationalMap map = RationalMap::polynomial({0.0, 1.0});
    CriticalOrbitPortrait portrait;
    Complex critical;  // the free critical point the relations refer to
    double residual = 0.0;
    bool attracted_to_marked = false;
    bool on_boundary = false;  // c on the boundary of the marked basin (some component)
    int seed_index = 0;
};

struct SolveReport {
    std::vector<FamilySolution> solutions;
    std::vector<std::string> notes;  // filtered candidates and why
    double best_residual = 0.0;
    int converged_seeds = 0;
};

class NoSolution : public std::runtime_error {
public:
    NoSolution(const std::string& what, std::vector<double> best) : std::runtime_error(what), best_(std::move(best)) {}
    const std::vector<double>& best_residuals() const { return best_; }

private:
    std::vector<double> best_;
};

struct SolveOptions {
    double tol = 1e-12;
    double margin = 1e-6;    // separation required by inequations
    double dedup = 1e-8;
    int threads = 0;
};

/// Complex grid seeds on [lo, hi]^2 with the given count per axis, for a
/// one-parameter family.
std::vector<std::vector<Complex>> grid_seeds(double lo, double hi, int per_axis);

/// The free critical point of a family member: the critical point away from
/// the pinned points. Throws when there is not exactly one.
Complex free_critical_point(const FamilySpec& spec, const RationalMap& map);

SolveReport solve_family(const FamilySpec& spec, const std::vector<std::vector<Complex>>& seeds,
                         const SolveOptions& opts = {});

// ---------------------------------------------------------------------------
// Merging

class MalformedMerge : public std::runtime_error {
public:
    MalformedMerge(const std::string& what, int got, int expected)
        : std::runtime_error(what), got_(got), expected_(expected) {}
    int got() const { return got_; }
    int expected() const { return expected_; }

private:
    int got_;
    int expected_;
};

/// Drops both marked nodes and keeps everything else. Nodes carrying
/// boundary angles are identified across the gluing: the g-node at angle t
/// meets the f-node at angle k/(d0-1) - t. Labels are prefixed "f." and "g.".
CriticalOrbitPortrait merge_portraits(const CriticalOrbitPortrait& pf, const CriticalOrbitPortrait& pg, int d0,
                                      int k = 1);

}  // namespace jm
