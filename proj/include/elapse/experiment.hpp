#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include <elapse/birth.hpp>
#include <elapse/csv_io.hpp>
#include <elapse/delay.hpp>
#include <elapse/diagnostics.hpp>
#include <elapse/errors.hpp>
#include <elapse/map_dynamics.hpp>
#include <elapse/particle.hpp>
#include <elapse/solver.hpp>
#include <elapse/steady_state.hpp>

namespace elapse {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

namespace cfg {

inline const json& need(const json& j, const char* key, const std::string& ctx) {
    if (!j.is_object() || !j.contains(key))
        throw invalid_argument_error("config: missing field " + ctx + "." + key);
    return j.at(key);
}

inline double need_num(const json& j, const char* key, const std::string& ctx) {
    const json& v = need(j, key, ctx);
    if (!v.is_number())
        throw invalid_argument_error("config: " + ctx + "." + key + " must be a number");
    return v.get<double>();
}

inline double opt_num(const json& j, const char* key, double fallback) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    if (!j.at(key).is_number())
        throw invalid_argument_error(std::string("config: ") + key + " must be a number");
    return j.at(key).get<double>();
}

inline std::string need_str(const json& j, const char* key, const std::string& ctx) {
    const json& v = need(j, key, ctx);
    if (!v.is_string())
        throw invalid_argument_error("config: " + ctx + "." + key + " must be a string");
    return v.get<std::string>();
}

inline bool opt_bool(const json& j, const char* key, bool fallback) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    if (!j.at(key).is_boolean())
        throw invalid_argument_error(std::string("config: ") + key + " must be a boolean");
    return j.at(key).get<bool>();
}

} // namespace cfg

inline RateModel model_from_config(const json& mj, const fs::path& base_dir,
                                   const std::string& ctx = "model") {
    const std::string kind = cfg::need_str(mj, "kind", ctx);
    if (kind == "constant") return RateModel::constant(cfg::need_num(mj, "level", ctx));
    if (kind == "step") {
        const double r0 = cfg::need_num(mj, "r0", ctx);
        const json& sj = cfg::need(mj, "sigma", ctx);
        const std::string st = cfg::need_str(sj, "type", ctx + ".sigma");
        std::function<double(double)> sigma;
        double lip = 0.0;
        if (st == "constant") {
            const double v = cfg::need_num(sj, "value", ctx + ".sigma");
            sigma = [v](double) { return v; };
        } else if (st == "affine") {
            const double a = cfg::need_num(sj, "offset", ctx + ".sigma");
            const double b = cfg::need_num(sj, "slope", ctx + ".sigma");
            sigma = [a, b](double I) { return a + b * I; };
            lip = std::fabs(b);
        } else {
            throw invalid_argument_error("config: " + ctx +
                                         ".sigma.type must be constant|affine");
        }
        lip = cfg::opt_num(mj, "sigma_lipschitz", lip);
        return RateModel::step(r0, std::move(sigma), lip,
                               cfg::opt_bool(mj, "inhibitory", true));
    }
    if (kind == "tanh_phi")
        return RateModel::tanh_phi(cfg::need_num(mj, "r0", ctx),
                                   cfg::need_num(mj, "gamma", ctx));
    if (kind == "tabulated")
        return load_tabulated_rate(base_dir / cfg::need_str(mj, "csv", ctx),
                                   cfg::opt_bool(mj, "inhibitory", true));
    throw invalid_argument_error("config: " + ctx +
                                 ".kind must be constant|step|tanh_phi|tabulated");
}

inline Grid grid_from_config(const json& gj, const RateModel& m) {
    const double dx = cfg::need_num(gj, "dx", "grid");
    if (gj.contains("x_max")) return Grid::with_extent(dx, cfg::need_num(gj, "x_max", "grid"));
    if (!(m.r_min() > 0.0))
        throw invalid_argument_error(
            "config: grid.x_max required when the model has no positive rate floor");
    return Grid::with_negligible_tail(dx, m.r_min());
}

inline Density initial_from_config(const json& ij, const RateModel& m, const Grid& g,
                                   const fs::path& base_dir,
                                   const std::string& ctx = "initial") {
    const std::string family = cfg::need_str(ij, "family", ctx);
    if (family == "exponential") {
        const double k = cfg::need_num(ij, "rate", ctx);
        if (!(k > 0.0))
            throw invalid_argument_error("config: " + ctx + ".rate must be > 0");
        return Density::project(g, [k](double x) { return k * std::exp(-k * x); });
    }
    if (family == "uniform") {
        const double a = cfg::need_num(ij, "a", ctx);
        const double b = cfg::need_num(ij, "b", ctx);
        if (!(b > a) || a < 0.0)
            throw invalid_argument_error("config: " + ctx + " needs 0 <= a < b");
        return Density::project(
            g, [a, b](double x) { return (x >= a && x <= b) ? 1.0 / (b - a) : 0.0; });
    }
    if (family == "stationary") return fixed_point_phi(m, g).density;
    if (family == "stationary_perturbed")
        return perturbed_stationary(m, g, cfg::opt_num(ij, "amplitude", 0.5));
    if (family == "csv") {
        const fs::path p = base_dir / cfg::need_str(ij, "path", ctx);
        Density n(g, load_grid_column(p, g));
        if (!n.nonnegative())
            throw invalid_argument_error("config: " + ctx + " csv density is negative");
        n.normalize();
        return n;
    }
    throw invalid_argument_error(
        "config: " + ctx +
        ".family must be exponential|uniform|stationary|stationary_perturbed|csv");
}

inline BirthKernel kernel_from_config(const json& kj, const Grid& g,
                                      const fs::path& base_dir,
                                      const std::string& ctx = "run.kernel") {
    const std::string type = cfg::need_str(kj, "type", ctx);
    if (type == "delta") return BirthKernel::delta_at_origin(g);
    if (type == "x_exp") {
        const double s = cfg::opt_num(kj, "scale", 1.0);
        if (!(s > 0.0))
            throw invalid_argument_error("config: " + ctx + ".scale must be > 0");
        return BirthKernel::project(
            g, [s](double x) { return x * std::exp(-x / s); });
    }
    if (type == "csv")
        return BirthKernel(g, load_grid_column(base_dir / cfg::need_str(kj, "path", ctx), g));
    throw invalid_argument_error("config: " + ctx + ".type must be delta|x_exp|csv");
}

struct ExperimentOptions {
    fs::path out_dir;
    fs::path base_dir = ".";
    std::optional<std::uint64_t> seed_override;
    std::optional<std::string> mode_override;
    std::optional<double> delay_override;
    std::optional<double> i_ini_override;
    std::optional<std::size_t> intervals_override;
};

namespace detail {

inline void write_trace_csv(const fs::path& p, const std::vector<TraceRecord>& trace) {
    std::vector<std::vector<double>> cols(4);
    for (const auto& r : trace) {
        cols[0].push_back(r.t);
        cols[1].push_back(r.I);
        cols[2].push_back(r.mass);
        cols[3].push_back(r.dist_to_ref);
    }
    write_csv(p, {"t", "I", "mass", "dist_L1"}, cols);
}

inline void write_density_csv(const fs::path& p, const Density& n) {
    std::vector<std::vector<double>> cols(2);
    for (std::size_t j = 0; j < n.grid.n_nodes(); ++j) {
        cols[0].push_back(n.grid.node(j));
        cols[1].push_back(n.values[j]);
    }
    write_csv(p, {"x", "n"}, cols);
}

inline void add_measured_rate(json& summary, const std::vector<TraceRecord>& trace) {
    std::vector<double> t, d;
    for (const auto& r : trace)
        if (!std::isnan(r.dist_to_ref)) {
            t.push_back(r.t);
            d.push_back(r.dist_to_ref);
        }
    if (t.size() < 10) return;
    try {
        summary["measured_rate"] = decay_rate(t, d);
    } catch (const numeric_error&) {
        // no decay regime; leave the field out
    }
}

} // namespace detail

/// Runs one experiment described by a config document; writes trace/density
/// CSVs, a summary JSON and a manifest into out_dir. Returns the summary.
inline json run_experiment(const json& config, const ExperimentOptions& opts) {
    if (!config.is_object()) throw invalid_argument_error("config: not a JSON object");

    const json& run = cfg::need(config, "run", "");
    std::string mode = opts.mode_override
                           ? *opts.mode_override
                           : cfg::need_str(run, "mode", "run");
    if (run.contains("mode") && opts.mode_override &&
        run.at("mode").get<std::string>() != *opts.mode_override)
        throw invalid_argument_error("config: run.mode '" +
                                     run.at("mode").get<std::string>() +
                                     "' does not match the subcommand");

    const RateModel model = model_from_config(cfg::need(config, "model", ""), opts.base_dir);
    const Grid grid = grid_from_config(cfg::need(config, "grid", ""), model);
    const std::uint64_t seed =
        opts.seed_override ? *opts.seed_override
                           : static_cast<std::uint64_t>(cfg::opt_num(config, "seed", 0));

    fs::create_directories(opts.out_dir);
    json summary;
    std::vector<std::string> outputs;
    std::vector<std::string> warnings;

    auto initial = [&](const char* key, const std::string& ctx) {
        return initial_from_config(cfg::need(config, key, ""), model, grid,
                                   opts.base_dir, ctx);
    };

    if (mode == "steady") {
        const SteadyState ss = fixed_point_phi(model, grid);
        summary["I_bar"] = ss.I_bar;
        summary["residual"] = ss.residual;
        summary["tail_bound"] = ss.tail_bound;
        detail::write_density_csv(opts.out_dir / "density.csv", ss.density);
        outputs.push_back("density.csv");
    } else if (mode == "autonomous" || mode == "linear") {
        Density n0 = initial("initial", "initial");
        RunOptions ro;
        Density reference;
        double I_bar = std::numeric_limits<double>::quiet_NaN();
        if (model.inhibitory()) {
            const SteadyState ss = fixed_point_phi(model, grid);
            reference = ss.density;
            I_bar = ss.I_bar;
            ro.reference = &reference;
        }
        RunResult res;
        const double T = cfg::need_num(run, "T", "run");
        if (mode == "autonomous") {
            if (!model.inhibitory())
                throw invalid_argument_error(
                    "config: run.mode autonomous requires an inhibitory model");
            res = run_autonomous(model, std::move(n0), T, ro);
        } else {
            const json& inp = cfg::need(run, "input", "run");
            const std::string it = cfg::need_str(inp, "type", "run.input");
            std::function<double(double)> J;
            if (it == "constant") {
                const double v = cfg::need_num(inp, "value", "run.input");
                J = [v](double) { return v; };
            } else if (it == "exp_decay") {
                const double base = cfg::need_num(inp, "base", "run.input");
                const double amp = cfg::need_num(inp, "amplitude", "run.input");
                const double rate = cfg::need_num(inp, "rate", "run.input");
                J = [base, amp, rate](double t) { return base + amp * std::exp(-rate * t); };
            } else {
                throw invalid_argument_error(
                    "config: run.input.type must be constant|exp_decay");
            }
            res = run_linear(model, std::move(n0), J, T, ro);
        }
        if (!std::isnan(I_bar)) summary["I_bar"] = I_bar;
        summary["final_I"] = res.trace.back().I;
        summary["final_mass"] = res.trace.back().mass;
        detail::add_measured_rate(summary, res.trace);
        detail::write_trace_csv(opts.out_dir / "trace.csv", res.trace);
        detail::write_density_csv(opts.out_dir / "density.csv", res.final);
        outputs.insert(outputs.end(), {"trace.csv", "density.csv"});
        warnings = res.warnings;
    } else if (mode == "delayed") {
        const double d = opts.delay_override ? *opts.delay_override
                                             : cfg::need_num(run, "delay", "run");
        if (!(d > 0.0))
            throw invalid_argument_error("config: run.delay must be > 0 for mode delayed");
        const double I_ini = opts.i_ini_override ? *opts.i_ini_override
                                                 : cfg::need_num(run, "i_ini", "run");
        auto intervals = static_cast<std::size_t>(
            opts.intervals_override ? static_cast<double>(*opts.intervals_override)
                                    : cfg::opt_num(run, "intervals", 0));
        double T = cfg::opt_num(run, "T", 0.0);
        if (T <= 0.0) {
            if (intervals == 0)
                throw invalid_argument_error(
                    "config: run.T or run.intervals required for mode delayed");
            T = static_cast<double>(intervals) * d;
        }
        const std::size_t prof_n =
            intervals > 0 ? intervals
                          : static_cast<std::size_t>(std::ceil(T / d)) + 1;
        const LimitProfile profile = limit_profile(model, grid, I_ini, prof_n);
        DelayedRunOptions dro;
        dro.profile = &profile;
        Density n0 = initial("initial", "initial");
        DelayedRunResult res = run_delayed(model, std::move(n0), I_ini, d, T, dro);
        summary["actual_delay"] = res.actual_delay;
        summary["final_I"] = res.trace.back().I;
        if (intervals > 0 && res.trace.back().t >=
                                 static_cast<double>(intervals) * res.actual_delay -
                                     0.5 * grid.dt()) {
            const CesaroError ce =
                cesaro_error(res.trace, profile, res.actual_delay, intervals);
            summary["cesaro_activity_error"] = ce.activity_error;
            if (ce.density_error) summary["cesaro_density_error"] = *ce.density_error;
        }
        detail::write_trace_csv(opts.out_dir / "trace.csv", res.trace);
        std::vector<std::vector<double>> cols(3);
        for (const auto& r : res.trace) {
            const double tau = r.t / res.actual_delay;
            cols[0].push_back(tau);
            cols[1].push_back(r.I);
            cols[2].push_back(profile.activity_at(tau));
        }
        write_csv(opts.out_dir / "rescaled.csv", {"tau", "I_d", "I_inf"}, cols);
        detail::write_density_csv(opts.out_dir / "density.csv", res.final);
        outputs.insert(outputs.end(), {"trace.csv", "rescaled.csv", "density.csv"});
        warnings = res.warnings;
    } else if (mode == "map") {
        const auto points = static_cast<std::size_t>(cfg::opt_num(run, "map_points", 512));
        if (points < 2)
            throw invalid_argument_error("config: run.map_points must be >= 2");
        std::vector<std::vector<double>> cols(3);
        for (std::size_t k = 0; k < points; ++k) {
            const double I =
                model.r_max() * static_cast<double>(k) / static_cast<double>(points - 1);
            const double p = phi(model, grid, I);
            cols[0].push_back(I);
            cols[1].push_back(p);
            cols[2].push_back(phi(model, grid, p));
        }
        write_csv(opts.out_dir / "map.csv", {"I", "phi", "psi"}, cols);
        outputs.push_back("map.csv");
        const MapAnalysis a = classify(model, grid);
        summary["I_bar"] = a.I_bar;
        summary["phi_prime"] = a.phi_prime_at_fp;
        summary["classification"] =
            a.classification == MapClassification::Period2 ? "period2" : "converging";
        json fixed = json::array();
        if (a.period2) {
            summary["I_minus"] = a.period2->first;
            summary["I_plus"] = a.period2->second;
            fixed.push_back(a.period2->first);
            fixed.push_back(a.I_bar);
            fixed.push_back(a.period2->second);
        } else {
            fixed.push_back(a.I_bar);
        }
        summary["psi_fixed_points"] = fixed;
    } else if (mode == "contract") {
        const double T = cfg::need_num(run, "T", "run");
        Density a = initial("initial", "initial");
        if (!config.contains("initial_b"))
            throw invalid_argument_error("config: initial_b required for mode contract");
        Density b = initial("initial_b", "initial_b");
        const ContractionReport rep = contraction_test(model, a, b, T);
        summary["max_violation"] = rep.max_violation;
        std::vector<std::vector<double>> cols(4);
        cols[0] = rep.times;
        cols[1] = rep.distances;
        cols[2] = rep.g_values;
        cols[3] = rep.defects;
        cols[3].push_back(std::numeric_limits<double>::quiet_NaN()); // align rows
        write_csv(opts.out_dir / "report.csv", {"t", "dist", "G", "defect"}, cols);
        outputs.push_back("report.csv");
    } else if (mode == "distr") {
        const double T = cfg::need_num(run, "T", "run");
        const BirthKernel B =
            kernel_from_config(cfg::need(run, "kernel", "run"), grid, opts.base_dir);
        Density n0 = initial("initial", "initial");
        const RunResult res = run_distributed(model, B, std::move(n0), T);
        summary["final_I"] = res.trace.back().I;
        summary["final_mass"] = res.trace.back().mass;
        detail::write_trace_csv(opts.out_dir / "trace.csv", res.trace);
        detail::write_density_csv(opts.out_dir / "density.csv", res.final);
        outputs.insert(outputs.end(), {"trace.csv", "density.csv"});
    } else if (mode == "system") {
        const double T = cfg::need_num(run, "T", "run");
        const RateModel m2 =
            config.contains("model2")
                ? model_from_config(config.at("model2"), opts.base_dir, "model2")
                : model;
        const BirthKernel B1 =
            kernel_from_config(cfg::need(run, "kernel", "run"), grid, opts.base_dir);
        const BirthKernel B2 =
            run.contains("kernel2")
                ? kernel_from_config(run.at("kernel2"), grid, opts.base_dir, "run.kernel2")
                : B1;
        SystemState s0;
        s0.n1 = initial("initial", "initial");
        s0.n2 = config.contains("initial2")
                    ? initial_from_config(config.at("initial2"), m2, grid,
                                          opts.base_dir, "initial2")
                    : s0.n1;
        const SystemRunResult res = run_system(model, m2, B1, B2, std::move(s0), T);
        std::vector<std::vector<double>> cols(5);
        for (const auto& r : res.trace) {
            cols[0].push_back(r.t);
            cols[1].push_back(r.I1);
            cols[2].push_back(r.I2);
            cols[3].push_back(r.mass1);
            cols[4].push_back(r.mass2);
        }
        write_csv(opts.out_dir / "trace.csv", {"t", "I1", "I2", "mass1", "mass2"}, cols);
        outputs.push_back("trace.csv");
        summary["final_I1"] = res.trace.back().I1;
        summary["final_I2"] = res.trace.back().I2;
    } else if (mode == "oracle") {
        const double T = cfg::need_num(run, "T", "run");
        const auto particles =
            static_cast<std::size_t>(cfg::opt_num(run, "particles", 100000));
        if (particles == 0)
            throw invalid_argument_error("config: run.particles must be >= 1");
        const double mc_dt = cfg::opt_num(run, "mc_dt", grid.dx);
        McMode mm = McMode::autonomous();
        const std::string om =
            run.contains("oracle_mode") ? run.at("oracle_mode").get<std::string>()
                                        : "autonomous";
        if (om == "delayed")
            mm = McMode::delayed(cfg::need_num(run, "delay", "run"),
                                 cfg::need_num(run, "i_ini", "run"));
        else if (om != "autonomous")
            throw invalid_argument_error(
                "config: run.oracle_mode must be autonomous|delayed");

        Density init = config.contains("initial")
                           ? initial("initial", "initial")
                           : fixed_point_phi(model, grid).density;
        ParticleEnsemble ens = ParticleEnsemble::from_density(init, particles, seed);
        McRunResult res = mc_run(model, grid, ens, T, mc_dt, mm);

        Density pde = model.inhibitory() ? fixed_point_phi(model, grid).density
                                         : Density(grid);
        std::vector<std::vector<double>> cols(3);
        for (std::size_t j = 0; j < grid.n_cells; ++j) {
            cols[0].push_back(grid.midpoint(j));
            cols[1].push_back(res.histogram[j]);
            cols[2].push_back(0.5 * (pde.values[j] + pde.values[j + 1]));
        }
        write_csv(opts.out_dir / "histogram.csv", {"x", "density_mc", "density_pde"},
                  cols);
        detail::write_trace_csv(opts.out_dir / "trace.csv", res.trace);
        outputs.insert(outputs.end(), {"histogram.csv", "trace.csv"});
        double tail_mean = 0.0;
        std::size_t count = 0;
        for (const auto& r : res.trace)
            if (r.t >= 0.5 * T) {
                tail_mean += r.I;
                ++count;
            }
        if (count) summary["mean_activity"] = tail_mean / static_cast<double>(count);
        if (model.inhibitory()) {
            summary["I_bar"] = fixed_point_phi(model, grid).I_bar;
            summary["histogram_l1"] = histogram_l1_distance(res.histogram, pde);
        }
        warnings = res.warnings;
    } else {
        throw invalid_argument_error("config: unknown run.mode '" + mode + "'");
    }

    summary["mode"] = mode;
    if (!warnings.empty()) summary["warnings"] = warnings;
    {
        std::ofstream out(opts.out_dir / "summary.json", std::ios::binary);
        out << summary.dump(2) << "\n";
        if (!out) throw numeric_error("cannot write summary.json");
    }
    outputs.push_back("summary.json");

    json manifest;
    char hash[32];
    std::snprintf(hash, sizeof(hash), "fnv1a64:%016llx",
                  static_cast<unsigned long long>(fnv1a64(config.dump())));
    manifest["config_hash"] = hash;
    manifest["mode"] = mode;
    manifest["seed"] = seed;
    manifest["outputs"] = outputs;
    {
        std::ofstream out(opts.out_dir / "manifest.json", std::ios::binary);
        out << manifest.dump(2) << "\n";
        if (!out) throw numeric_error("cannot write manifest.json");
    }
    return summary;
}

inline json load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw invalid_argument_error("config: cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw invalid_argument_error("config: parse error in " + path.string() + ": " +
                                     e.what());
    }
    return j;
}

} // namespace elapse
