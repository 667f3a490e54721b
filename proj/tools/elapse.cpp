#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <future>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <elapse/experiment.hpp>

namespace fs = std::filesystem;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

fs::path resolve_out_dir(const std::string& out_flag, const elapse::json& config,
                         const fs::path& config_path) {
    if (!out_flag.empty()) return out_flag;
    if (config.contains("output") && config.at("output").is_string())
        return config.at("output").get<std::string>();
    const char* root = std::getenv("ELAPSE_OUT_ROOT");
    const fs::path base = root ? fs::path(root) : fs::path("elapse_out");
    return base / config_path.stem();
}

int run_one(const fs::path& config_path, const std::string& mode,
            const std::string& out_flag, const std::optional<std::uint64_t>& seed,
            const std::optional<double>& delay, const std::optional<double>& i_ini,
            const std::optional<std::size_t>& intervals) {
    try {
        const elapse::json config = elapse::load_config(config_path);
        elapse::ExperimentOptions opts;
        opts.base_dir = config_path.parent_path();
        opts.out_dir = resolve_out_dir(out_flag, config, config_path);
        opts.seed_override = seed;
        opts.delay_override = delay;
        opts.i_ini_override = i_ini;
        opts.intervals_override = intervals;

        // Subcommands map onto run modes; "simulate" accepts both open-loop
        // and closed-loop runs and defers to the config.
        if (mode == "simulate") {
            std::string m = "autonomous";
            if (config.contains("run") && config.at("run").contains("mode"))
                m = config.at("run").at("mode").get<std::string>();
            if (m != "autonomous" && m != "linear") {
                std::cerr << "error: config run.mode '" << m
                          << "' is not a simulate mode (autonomous|linear)\n";
                return kExitValidation;
            }
            opts.mode_override = m;
        } else {
            opts.mode_override = mode;
        }

        elapse::run_experiment(config, opts);
        std::cout << "wrote " << opts.out_dir.string() << "\n";
        return 0;
    } catch (const elapse::invalid_argument_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const elapse::numeric_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    }
}

int run_sweep(const fs::path& config_path, const std::string& out_flag,
              const std::optional<std::uint64_t>& seed) {
    elapse::json config;
    try {
        config = elapse::load_config(config_path);
        if (!config.contains("experiments") || !config.at("experiments").is_array())
            throw elapse::invalid_argument_error(
                "config: sweep file needs an 'experiments' array of paths");
    } catch (const elapse::invalid_argument_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }

    const fs::path base = config_path.parent_path();
    const fs::path out_root = out_flag.empty()
                                  ? resolve_out_dir("", config, config_path)
                                  : fs::path(out_flag);
    std::vector<std::future<int>> results;
    std::vector<fs::path> paths;
    for (const auto& entry : config.at("experiments")) {
        if (!entry.is_string()) {
            std::cerr << "error: config: experiments entries must be path strings\n";
            return kExitValidation;
        }
        paths.push_back(base / entry.get<std::string>());
    }
    results.reserve(paths.size());
    for (const auto& p : paths) {
        results.push_back(std::async(std::launch::async, [&, p]() {
            return run_one(p, "", (out_root / p.stem()).string(), seed, std::nullopt,
                           std::nullopt, std::nullopt);
        }));
    }
    int worst = 0;
    for (auto& f : results) worst = std::max(worst, f.get());
    return worst;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical laboratory for age-structured neural population dynamics"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    app.add_option("--config", config_path, "experiment config (JSON)")->required();
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "override the config seed");

    std::optional<double> delay_flag;
    std::optional<double> i_ini_flag;
    std::optional<std::size_t> intervals_flag;

    const std::map<std::string, std::string> plain = {
        {"steady", "stationary state: fixed point of the activity map"},
        {"simulate", "time-step the autonomous or input-driven equation"},
        {"map", "sample the activity map and classify its fixed point"},
        {"contract", "two-solution distance and dissipation report"},
        {"distr", "distributed-birth run"},
        {"system", "two-population cross-coupled run"},
        {"oracle", "interacting-particle cross-check"},
    };
    for (const auto& [name, desc] : plain) app.add_subcommand(name, desc);

    auto* delay_cmd = app.add_subcommand("delay", "delayed closed-loop run");
    delay_cmd->add_option("--delay", delay_flag, "transmission delay");
    delay_cmd->add_option("--intervals", intervals_flag, "rescaled-time horizon");
    delay_cmd->add_option("--i-ini", i_ini_flag, "activity history on [-d, 0)");

    app.add_subcommand("sweep", "run the experiments listed in the config concurrently");

    CLI11_PARSE(app, argc, argv);
    const std::string sub = app.get_subcommands().front()->get_name();

    if (sub == "sweep") return run_sweep(config_path, out_dir, seed);
    const std::string mode = sub == "delay" ? "delayed" : sub;
    return run_one(config_path, mode, out_dir, seed, delay_flag, i_ini_flag,
                   intervals_flag);
}
