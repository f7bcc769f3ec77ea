#include "jm/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace jm {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

Complex complex_of(const json& j, const std::string& where) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (j.is_string()) {
        try {
            return parse_complex(j.get<std::string>());
        } catch (const std::exception& e) {
            throw ConfigError(where + ": " + e.what());
        }
    }
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
        return {j[0].get<double>(), j[1].get<double>()};
    throw ConfigError(where + ": expected a number, a complex literal or [re, im]");
}

SpherePoint sphere_of(const json& j, const std::string& where) {
    if (j.is_string() && (j == "inf" || j == "infinity")) return SpherePoint::infinity();
    return complex_of(j, where);
}

std::vector<Complex> complex_list(const json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + ": expected a list");
    std::vector<Complex> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(complex_of(j[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

std::vector<std::string> string_list(const json& j, const std::string& where) {
    std::vector<std::string> out;
    if (!j.is_array()) throw ConfigError(where + ": expected a list");
    for (const auto& e : j) {
        if (e.is_string()) out.push_back(e.get<std::string>());
        else if (e.is_number()) out.push_back(e.dump());
        else throw ConfigError(where + ": expected strings");
    }
    return out;
}

template <class T>
T get(const json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + ": wrong type");
    }
}

FamilySpec family_of(const json& j, const std::string& where) {
    check_keys(j, where, {"name", "params", "num", "den", "relations", "normalization", "marked", "pinned"});
    FamilySpec s;
    s.name = get<std::string>(j, "name", "family", where);
    if (j.contains("params")) s.params = string_list(j["params"], where + ".params");
    if (!j.contains("num")) throw ConfigError(where + ": missing 'num'");
    s.num = string_list(j["num"], where + ".num");
    if (j.contains("den")) s.den = string_list(j["den"], where + ".den");
    if (j.contains("relations")) s.relations = string_list(j["relations"], where + ".relations");
    s.normalization = get<std::string>(j, "normalization", "", where);
    if (j.contains("marked")) s.marked = sphere_of(j["marked"], where + ".marked");
    if (j.contains("pinned")) {
        s.pinned.clear();
        for (const auto& p : j["pinned"]) s.pinned.push_back(sphere_of(p, where + ".pinned"));
    }
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
    }
    return s;
}

MapConfig map_of(const std::string& name, const json& j) {
    const std::string where = "maps." + name;
    check_keys(j, where, {"coefficients", "num", "den", "family", "seeds", "select", "center"});
    MapConfig m;
    m.name = name;
    if (j.contains("center")) m.center = sphere_of(j["center"], where + ".center");
    if (j.contains("coefficients")) {
        m.map = RationalMap::polynomial(complex_list(j["coefficients"], where + ".coefficients"));
    } else if (j.contains("num")) {
        const auto den = j.contains("den") ? complex_list(j["den"], where + ".den") : CoeffList{1.0};
        m.map = RationalMap(complex_list(j["num"], where + ".num"), den);
    } else if (j.contains("family")) {
        m.family = family_of(j["family"], where + ".family");
        const json& seeds = j.contains("seeds") ? j["seeds"] : json::object({{"grid", {-3, 3, 13}}});
        check_keys(seeds, where + ".seeds", {"grid", "list"});
        if (seeds.contains("grid")) {
            const auto& g = seeds["grid"];
            if (!g.is_array() || g.size() != 3) throw ConfigError(where + ".seeds.grid: expected [lo, hi, per_axis]");
            if (m.family->params.size() != 1) throw ConfigError(where + ".seeds.grid: only for one parameter");
            m.seeds = grid_seeds(g[0].get<double>(), g[1].get<double>(), g[2].get<int>());
        }
        if (seeds.contains("list"))
            for (const auto& s : seeds["list"]) m.seeds.push_back(complex_list(s, where + ".seeds.list"));
        if (j.contains("select")) m.select = complex_list(j["select"], where + ".select");
    } else {
        throw ConfigError(where + ": needs 'coefficients', 'num' or 'family'");
    }
    return m;
}

Viewport viewport_of(const json& j, const std::string& where) {
    Viewport vp;
    if (j.contains("center")) vp.center = complex_of(j["center"], where + ".center");
    vp.width = get<double>(j, "width", vp.width, where);
    if (j.contains("pixels")) {
        const auto& p = j["pixels"];
        if (!p.is_array() || p.size() != 2) throw ConfigError(where + ".pixels: expected [w, h]");
        vp.w = p[0].get<int>();
        vp.h = p[1].get<int>();
    }
    try {
        vp.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
    }
    return vp;
}

std::pair<int, int> line_column(const std::string& text, std::size_t byte) {
    int line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

}  // namespace

const MapConfig& Config::map(const std::string& name) const {
    for (const auto& m : maps)
        if (m.name == name) return m;
    throw ConfigError("no map named '" + name + "'");
}

Config parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = line_column(text, e.byte);
        // The library message already names the line and column.
        throw ConfigError(e.what(), line, col);
    }
    check_keys(j, "config", {"name", "maps", "mating", "gluing", "render", "curves", "tol", "seed", "comment"});
    Config c;
    c.name = get<std::string>(j, "name", c.name, "config");
    c.tol = get<double>(j, "tol", c.tol, "config");
    c.seed = get<std::uint64_t>(j, "seed", c.seed, "config");
    if (j.contains("maps")) {
        if (!j["maps"].is_object()) throw ConfigError("maps: expected an object");
        for (const auto& [name, m] : j["maps"].items()) c.maps.push_back(map_of(name, m));
    }
    if (j.contains("mating")) {
        const auto& m = j["mating"];
        check_keys(m, "mating", {"f", "g", "d0", "k", "box", "per_axis", "random_seeds", "seed"});
        MatingConfig mc;
        mc.f = get<std::string>(m, "f", mc.f, "mating");
        mc.g = get<std::string>(m, "g", mc.g, "mating");
        mc.d0 = get<int>(m, "d0", mc.d0, "mating");
        mc.k = get<int>(m, "k", mc.k, "mating");
        mc.realize.box = get<double>(m, "box", mc.realize.box, "mating");
        mc.realize.per_axis = get<int>(m, "per_axis", mc.realize.per_axis, "mating");
        mc.realize.random_seeds = get<int>(m, "random_seeds", mc.realize.random_seeds, "mating");
        mc.realize.seed = get<std::uint64_t>(m, "seed", c.seed, "mating");
        c.map(mc.f);
        c.map(mc.g);
        c.mating = mc;
    }
    if (j.contains("gluing")) {
        const auto& g = j["gluing"];
        check_keys(g, "gluing", {"n", "epsilon", "circle_samples"});
        GluingConfig gc;
        gc.n = get<int>(g, "n", gc.n, "gluing");
        gc.epsilon = get<double>(g, "epsilon", gc.epsilon, "gluing");
        gc.circle_samples = get<int>(g, "circle_samples", gc.circle_samples, "gluing");
        c.gluing = gc;
    }
    if (j.contains("render")) {
        const json list = j["render"].is_array() ? j["render"] : json::array({j["render"]});
        for (std::size_t i = 0; i < list.size(); ++i) {
            const std::string where = "render[" + std::to_string(i) + "]";
            check_keys(list[i], where, {"target", "center", "width", "pixels", "max_iter", "file"});
            RenderConfig r;
            r.target = get<std::string>(list[i], "target", "mating", where);
            r.viewport = viewport_of(list[i], where);
            r.max_iter = get<int>(list[i], "max_iter", r.max_iter, where);
            r.file = get<std::string>(list[i], "file", r.target + ".ppm", where);
            if (r.target != "mating") c.map(r.target);
            c.renders.push_back(r);
        }
    }
    if (j.contains("curves")) {
        const auto& k = j["curves"];
        check_keys(k, "curves", {"count", "seed", "samples", "vertices", "ev_depth"});
        CurvesConfig cc;
        cc.count = get<int>(k, "count", cc.count, "curves");
        cc.seed = get<std::uint64_t>(k, "seed", cc.seed, "curves");
        cc.samples = get<int>(k, "samples", cc.samples, "curves");
        cc.vertices = get<int>(k, "vertices", cc.vertices, "curves");
        cc.ev_depth = get<int>(k, "ev_depth", cc.ev_depth, "curves");
        c.curves = cc;
    }
    return c;
}

Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what(), e.line(), e.column());
    }
}

RationalMap resolve_map(const MapConfig& mc, SolveReport* report, const SolveOptions& opts) {
    if (mc.map) return *mc.map;
    const auto rep = solve_family(*mc.family, mc.seeds, opts);
    if (report) *report = rep;
    if (rep.solutions.empty()) throw NoSolution("map '" + mc.name + "': no admissible solution", {});
    std::size_t best = 0;
    if (mc.select) {
        double dist = 1e300;
        for (std::size_t i = 0; i < rep.solutions.size(); ++i) {
            double d = 0.0;
            const auto& p = rep.solutions[i].params;
            for (std::size_t k = 0; k < std::min(p.size(), mc.select->size()); ++k) d += std::norm(p[k] - (*mc.select)[k]);
            if (d < dist) {
                dist = d;
                best = i;
            }
        }
    }
    return rep.solutions[best].map;
}

}  // namespace jm
