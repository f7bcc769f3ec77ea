// jmate: command line front end for the Jordan mating pipeline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"

#include "jm/config.hpp"
#include "jm/parallel.hpp"
#include "jm/report.hpp"
#include "jm/suite.hpp"

namespace fs = std::filesystem;
using namespace jm;

namespace {

struct Common {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<double> tol;
    int threads = 0;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config) {
    auto* opt = cmd->add_option("--config", c.config, "JSON config file");
    if (needs_config) opt->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", c.out, "output directory")->capture_default_str();
    cmd->add_option("--seed", c.seed, "overrides the config seed");
    cmd->add_option("--tol", c.tol, "acceptance tolerance, overrides the config");
    cmd->add_option("--threads", c.threads, "worker threads, 0 for all cores (JM_THREADS overrides)");
}

Config load(const Common& c) {
    Config cfg = load_config(c.config);
    if (c.seed) {
        cfg.seed = *c.seed;
        if (cfg.mating) cfg.mating->realize.seed = *c.seed;
    }
    if (c.tol) cfg.tol = *c.tol;
    if (cfg.mating) cfg.mating->realize.threads = c.threads;
    return cfg;
}

void write_json(const fs::path& path, const Json& j) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write " + path.string());
    std::cout << "wrote " << path.string() << '\n';
}

struct Maps {
    std::map<std::string, RationalMap> map;
    Json reports = Json::object();
};

Maps resolve_all(const Config& cfg, int threads) {
    Maps m;
    SolveOptions so;
    so.threads = threads;
    for (const auto& mc : cfg.maps) {
        SolveReport rep;
        m.map.emplace(mc.name, resolve_map(mc, &rep, so));
        if (mc.family) m.reports[mc.name] = to_json(rep);
    }
    return m;
}

MatingSpec mating_spec(const Config& cfg, const Maps& maps) {
    if (!cfg.mating) throw ConfigError("config has no 'mating' section");
    MatingSpec s;
    s.f = maps.map.at(cfg.mating->f);
    s.g = maps.map.at(cfg.mating->g);
    s.f_center = cfg.map(cfg.mating->f).center;
    s.g_center = cfg.map(cfg.mating->g).center;
    s.d0 = cfg.mating->d0;
    s.k = cfg.mating->k;
    return s;
}

int cmd_solve(const Common& c) {
    const Config cfg = load(c);
    const Maps maps = resolve_all(cfg, c.threads);
    bool ok = true;
    std::printf("%-8s %-28s %-12s %s\n", "map", "parameter", "residual", "critical point");
    for (const auto& mc : cfg.maps) {
        if (!mc.family) continue;
        for (const auto& s : maps.reports[mc.name]["solutions"]) {
            const double res = s["residual"].get<double>();
            ok = ok && res < cfg.tol;
            std::printf("%-8s (%+.12f, %+.12f) %-12.3e (%+.9f, %+.9f)\n", mc.name.c_str(), s["params"][0][0].get<double>(),
                        s["params"][0][1].get<double>(), res, s["critical"][0].get<double>(),
                        s["critical"][1].get<double>());
        }
    }
    write_json(fs::path(c.out) / "solve.json", Json{{"config", cfg.name}, {"maps", maps.reports}});
    return ok ? 0 : 1;
}

int cmd_mate(const Common& c) {
    const Config cfg = load(c);
    const Maps maps = resolve_all(cfg, c.threads);
    const auto rep = realize(mating_spec(cfg, maps), cfg.mating->realize);
    Json j{{"config", cfg.name}, {"maps", maps.reports}, {"realization", to_json(rep)}};
    bool ok = rep.primary.has_value();
    Json checks = Json::array();
    for (std::size_t i = 0; i < rep.solutions.size(); ++i) {
        const auto v = verify_realization(rep.solutions[i], rep.family, rep.merged, cfg.tol, cfg.seed);
        checks.push_back(to_json(v));
        if (rep.primary && i == *rep.primary) ok = ok && v.ok();
        std::printf("solution %zu%s: degree %d, relation residual %.3e, %s\n", i,
                    rep.primary && i == *rep.primary ? " (primary)" : "", v.degree, v.max_relation_residual,
                    v.ok() ? "verified" : "verification FAILED");
    }
    j["verification"] = checks;
    write_json(fs::path(c.out) / "mate.json", j);
    return ok ? 0 : 1;
}

int cmd_glue(const Common& c) {
    const Config cfg = load(c);
    const Maps maps = resolve_all(cfg, c.threads);
    const MatingSpec spec = mating_spec(cfg, maps);
    const GluingConfig gc = cfg.gluing.value_or(GluingConfig{});
    auto gm = std::make_shared<const GluingMap>(build_gluing(BoettcherChart(spec.f, spec.f_center),
                                                             BoettcherChart(spec.g, spec.g_center), spec.k, gc.n,
                                                             {.epsilon = gc.epsilon}));
    const auto rep = verify_gluing(*gm, 1e-5, c.threads);
    const TopologicalMatingModel model(gm);
    const auto cm = check_circle_model(model, gc.circle_samples, c.threads);
    fs::create_directories(c.out);
    {
        std::ofstream csv(fs::path(c.out) / "gluing.csv");
        write_gluing_csv(csv, *gm);
    }
    std::cout << "wrote " << (fs::path(c.out) / "gluing.csv").string() << '\n';
    write_json(fs::path(c.out) / "glue.json", Json{{"config", cfg.name}, {"gluing", to_json(rep)}, {"circle_model", to_json(cm)}});
    std::printf("winding %d, monotone %s, equivariance defect %.3e, circle error %.3e, continuity %.3e\n",
                rep.polygon_winding, rep.monotone ? "yes" : "no", rep.equivariance_defect, cm.circle_error,
                cm.continuity_error);
    return rep.ok() && cm.circle_error < 1e-3 && cm.continuity_error < 1e-3 ? 0 : 1;
}

int cmd_render(const Common& c) {
    const Config cfg = load(c);
    if (cfg.renders.empty()) throw ConfigError("config has no 'render' section");
    const Maps maps = resolve_all(cfg, c.threads);
    std::optional<RationalMap> mated;
    Json out = Json::array();
    for (const auto& r : cfg.renders) {
        RationalMap map = RationalMap::polynomial({0, 0, 1});
        if (r.target == "mating") {
            if (!mated) {
                const auto rep = realize(mating_spec(cfg, maps), cfg.mating->realize);
                if (!rep.primary) throw NoRealization("no realization to render", {});
                mated = rep.solutions[*rep.primary].R;
            }
            map = *mated;
        } else {
            map = maps.map.at(r.target);
        }
        const auto cycles = attracting_cycles(map);
        const auto raster = render(map, r.viewport, cycles, r.max_iter, c.threads);
        const fs::path file = fs::path(c.out) / r.file;
        fs::create_directories(file.parent_path());
        std::ofstream ppm(file, std::ios::binary);
        write_ppm(ppm, raster);
        std::cout << "wrote " << file.string() << " (" << cycles.size() << " attracting cycles)\n";
        Json j = to_json(raster);
        j["target"] = r.target;
        j["file"] = r.file;
        out.push_back(j);
    }
    write_json(fs::path(c.out) / "render.json", Json{{"config", cfg.name}, {"renders", out}});
    return 0;
}

int cmd_curves(const Common& c) {
    const Config cfg = load(c);
    const CurvesConfig cc = cfg.curves.value_or(CurvesConfig{});
    const Maps maps = resolve_all(cfg, c.threads);
    const auto rep = realize(mating_spec(cfg, maps), cfg.mating->realize);
    if (!rep.primary) throw NoRealization("no realization for the curve harness", {});
    const auto& rm = rep.solutions[*rep.primary];
    const auto marked = mating_marked_points(rm, rep.merged);
    const auto fit = invariant_interface(rm.R, cfg.mating->d0, marked, cc.samples);
    std::vector<PolygonalCurve> curves;
    for (int batch = 0; static_cast<int>(curves.size()) < cc.count && batch < 16; ++batch)
        for (auto& k : random_curves(fit.T, marked, 4 * cc.count, cc.seed + batch, cc.vertices))
            if (static_cast<int>(curves.size()) < cc.count && !is_peripheral(k, marked)) curves.push_back(std::move(k));
    HarnessOptions ho;
    ho.ev_depth = cc.ev_depth;
    ho.threads = c.threads;
    const auto h = run_lemma_harness(rm.R, fit.T, marked, curves, ho);

    const fs::path dir = fs::path(c.out) / "curves";
    fs::create_directories(dir);
    {
        std::ofstream t(dir / "interface.csv");
        write_curve_csv(t, PolygonalCurve{fit.T.points()});
    }
    for (std::size_t i = 0; i < curves.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "curve_%03zu.csv", i);
        std::ofstream f(dir / name);
        write_curve_csv(f, curves[i]);
    }
    Json mp = Json::array();
    for (const auto& x : marked.points) {
        Json j{{"label", x.label}, {"z", to_json(x.z)}, {"origin", std::string(1, x.origin)}, {"periodic", x.periodic},
               {"image", x.image}};
        if (x.t) j["t"] = *x.t;
        mp.push_back(j);
    }
    write_json(fs::path(c.out) / "curves.json",
               Json{{"config", cfg.name},
                    {"interface", {{"samples", fit.T.size()}, {"iterations", fit.iterations}, {"change", fit.change},
                                   {"marked_error", fit.marked_error}, {"converged", fit.converged}}},
                    {"marked", mp},
                    {"harness", to_json(h)}});
    std::printf("%zu curves: %d o-o violations, %d ess violations, %d multiplicity mismatches, %d failures\n",
                curves.size(), h.oo_violations, h.ess_violations, h.multiplicity_mismatches, h.failures);
    return h.ok() && static_cast<int>(curves.size()) == cc.count ? 0 : 1;
}

int cmd_verify(const Common& c, bool all, const std::vector<int>& only) {
    if (!all && only.empty()) throw CLI::ValidationError("verify", "give --all or --only");
    SuiteOptions so;
    so.threads = c.threads;
    so.seed = c.seed.value_or(1);
    so.out_dir = c.out;
    so.only = only;
    fs::create_directories(c.out);
    const auto results = run_suite(so, [](const CheckResult& r) {
        std::printf("[%s] %d. %s: %s (%.1f s)\n", r.passed ? "PASS" : "FAIL", r.id, r.name.c_str(), r.summary.c_str(),
                    r.seconds);
        std::fflush(stdout);
    });
    const Json rep = suite_report(results);
    write_json(fs::path(c.out) / "verify.json", rep);
    Json times = Json::object();
    for (const auto& r : results) times[std::to_string(r.id)] = r.seconds;
    write_json(fs::path(c.out) / "timings.json", times);
    return rep["passed"].get<bool>() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Jordan mating of two postcritically finite maps"};
    app.require_subcommand(1);
    Common c;
    bool all = false;
    std::vector<int> only;
    auto* solve = app.add_subcommand("solve", "solve the families in a config for their critical relations");
    add_common(solve, c, true);
    auto* render_cmd = app.add_subcommand("render", "render basins of the maps or of the mating");
    add_common(render_cmd, c, true);
    auto* glue = app.add_subcommand("glue", "build and check the boundary gluing and the circle model");
    add_common(glue, c, true);
    auto* mate = app.add_subcommand("mate", "realize the mating as a rational map and verify it");
    add_common(mate, c, true);
    auto* curves = app.add_subcommand("curves", "run the curve lemma harness on the realized mating");
    add_common(curves, c, true);
    auto* verify = app.add_subcommand("verify", "run the invariant suite");
    add_common(verify, c, false);
    verify->add_flag("--all", all, "every check");
    verify->add_option("--only", only, "check ids")->check(CLI::Range(1, 8));
    CLI11_PARSE(app, argc, argv);
    try {
        if (*solve) return cmd_solve(c);
        if (*render_cmd) return cmd_render(c);
        if (*glue) return cmd_glue(c);
        if (*mate) return cmd_mate(c);
        if (*curves) return cmd_curves(c);
        if (*verify) return cmd_verify(c, all, only);
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "jmate: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
