#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "jm/portrait.hpp"
#include "jm/realizer.hpp"
#include "jm/render.hpp"

namespace jm {

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& what, int line = 0, int column = 0)
        : std::runtime_error(what), line_(line), column_(column) {}
    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_, column_;
};

/// A map given either by coefficients or by a family plus relations to solve.
struct MapConfig {
    std::string name;
    std::optional<RationalMap> map;
    std::optional<FamilySpec> family;
    std::vector<std::vector<Complex>> seeds;
    std::optional<std::vector<Complex>> select;  // pick the solution nearest these parameters
    SpherePoint center{0.0};                     // the marked superattracting fixed point
};

struct MatingConfig {
    std::string f = "f", g = "g";
    int d0 = 2;
    int k = 1;
    RealizeOptions realize;
};

struct GluingConfig {
    int n = 2048;
    double epsilon = 1e-4;
    int circle_samples = 512;
};

struct RenderConfig {
    std::string target;  // a map name or "mating"
    Viewport viewport;
    int max_iter = 500;
    std::string file;
};

struct CurvesConfig {
    int count = 50;  // non-peripheral curves kept
    std::uint64_t seed = 7;
    int samples = 2048;  // vertices of the invariant interface
    int vertices = 256;
    int ev_depth = -1;
};

struct Config {
    std::string name = "run";
    std::vector<MapConfig> maps;
    std::optional<MatingConfig> mating;
    std::optional<GluingConfig> gluing;
    std::vector<RenderConfig> renders;
    std::optional<CurvesConfig> curves;
    double tol = 1e-10;
    std::uint64_t seed = 1;

    const MapConfig& map(const std::string& name) const;
};

/// Parse errors carry the line and column of the offending byte.
Config parse_config(const std::string& text);
Config load_config(const std::string& path);

/// The map itself, solving the family when needed (report filled if given).
RationalMap resolve_map(const MapConfig& mc, SolveReport* report = nullptr, const SolveOptions& opts = {});

}  // namespace jm
