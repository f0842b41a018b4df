#include "mfg/io.hpp"
#include "mfg/market.hpp"
#include "mfg/meanfield.hpp"
#include "mfg/model.hpp"
#include "mfg/numerics.hpp"
#include "mfg/rng.hpp"
#include "mfg/verify.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitCheckFailed = 3;

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::optional<uint64_t> seed;
    std::optional<int> steps;
    bool check = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON configuration file (defaults if omitted)");
    cmd->add_option("--out", args.out_dir, "output directory (default: run.out_dir)");
    cmd->add_option("--seed", args.seed, "override run.seed");
    cmd->add_option("--steps", args.steps, "override run.time_steps");
    cmd->add_flag("--check", args.check, "apply acceptance bands; exit 3 on failure");
}

mfg::Config load_effective_config(const CommonArgs& args) {
    std::string text = "{}";
    if (!args.config_path.empty()) {
        std::ifstream is(args.config_path);
        if (!is) throw mfg::ConfigError("cannot open config file: " + args.config_path);
        std::stringstream ss;
        ss << is.rdbuf();
        text = ss.str();
    }
    mfg::Config cfg = mfg::load_config(text);
    if (args.seed) cfg.run.seed = *args.seed;
    if (args.steps) {
        if (*args.steps < 2) throw mfg::ConfigError("run.time_steps: must be >= 2");
        cfg.run.time_steps = *args.steps;
    }
    if (!args.out_dir.empty()) cfg.run.out_dir = args.out_dir;
    std::filesystem::create_directories(cfg.run.out_dir);
    return cfg;
}

std::string out_path(const mfg::Config& cfg, const std::string& name) {
    return (std::filesystem::path(cfg.run.out_dir) / name).string();
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stoi(item));
    }
    if (out.empty()) throw mfg::ConfigError("empty integer list: " + text);
    return out;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stod(item));
    }
    if (out.empty()) throw mfg::ConfigError("empty list: " + text);
    return out;
}

// ---- subcommands ------------------------------------------------------------

int run_mfe_path(const CommonArgs& args) {
    const mfg::Config cfg = load_effective_config(args);
    const mfg::IntensityPath ip = mfg::solve_intensity_ode(cfg.params, cfg.run.time_steps);
    const mfg::EquilibriumPath ep = mfg::mfe_path(cfg.params, ip);

    const std::string path = out_path(cfg, "equilibrium.csv");
    mfg::CsvWriter csv(path, "mfe-path", cfg);
    const std::string cols[] = {"t", "lambda_l", "lambda_f", "pi_star", "eta_star", "rho", "varphi"};
    csv.header(cols);
    for (size_t k = 0; k < ep.grid.size(); ++k) {
        const double row[] = {ep.grid[k], ip.lambda_l[k], ip.lambda_f[k], ep.pi_star[k],
                              ep.eta_star[k], ep.rho[k], ep.varphi[k]};
        csv.row(row);
    }
    csv.close();

    double max_resid = 0.0;
    for (size_t k = 0; k < ep.grid.size(); ++k)
        max_resid = std::max(max_resid,
                             std::fabs(mfg::phi_big(ep.pi_star[k], ip.lambda_f[k], cfg.params.o)));
    std::printf("mfe-path: pi*(0)=%s pi*(T)=%s max|Phi|=%.2e varphi_T=%g -> %s\n",
                mfg::format_double(ep.pi_star.front()).c_str(),
                mfg::format_double(ep.pi_star.back()).c_str(), max_resid, ep.varphi.back(),
                path.c_str());

    if (args.check) {
        bool ok = max_resid <= 1e-12 && ep.varphi.back() == 1.0;
        const mfg::AgentType& o = cfg.params.o;
        // lambda_l increasing in t <=> beta*varsigma > alpha(1 - lambda_inf/lambda0);
        // in that regime pi* must be strictly decreasing.
        if (o.beta * o.varsigma > o.alpha * (1.0 - o.lambda_inf / o.lambda0)) {
            for (size_t k = 0; k + 1 < ep.pi_star.size() && ok; ++k)
                ok = ep.pi_star[k + 1] < ep.pi_star[k];
        }
        if (!ok) {
            std::printf("mfe-path: check FAILED\n");
            return kExitCheckFailed;
        }
        std::printf("mfe-path: check passed\n");
    }
    return kExitOk;
}

int run_sensitivity(const CommonArgs& args, const std::string& param, double from, double to,
                    int points, double t_eval) {
    const mfg::Config cfg = load_effective_config(args);
    if (points < 2) throw mfg::ConfigError("sensitivity: --points must be >= 2");
    std::vector<double> values(static_cast<size_t>(points));
    for (int i = 0; i < points; ++i)
        values[static_cast<size_t>(i)] =
            from + (to - from) * static_cast<double>(i) / static_cast<double>(points - 1);
    const auto table =
        mfg::sensitivity_sweep(cfg.params, param, values, t_eval, cfg.run.time_steps);

    const std::string path = out_path(cfg, "sensitivity_" + param + ".csv");
    mfg::CsvWriter csv(path, "sensitivity --param " + param, cfg);
    const std::string cols[] = {"param_value", "pi_star"};
    csv.header(cols);
    for (const auto& [v, pi] : table) {
        const double row[] = {v, pi};
        csv.row(row);
    }
    csv.close();
    std::printf("sensitivity: %s in [%g,%g], pi*(t=%g) from %s to %s -> %s\n", param.c_str(), from,
                to, t_eval, mfg::format_double(table.front().second).c_str(),
                mfg::format_double(table.back().second).c_str(), path.c_str());

    if (args.check && (param == "alpha" || param == "beta" || param == "varsigma")) {
        for (size_t i = 0; i + 1 < table.size(); ++i) {
            if (!(table[i + 1].second < table[i].second)) {
                std::printf("sensitivity: check FAILED (column not strictly decreasing)\n");
                return kExitCheckFailed;
            }
        }
        std::printf("sensitivity: check passed (strictly decreasing)\n");
    }
    return kExitOk;
}

int run_simulate(const CommonArgs& args, std::optional<int> paths_opt, int agent,
                 const std::string& dump_hawkes) {
    mfg::Config cfg = load_effective_config(args);
    if (paths_opt) cfg.run.mc_paths = *paths_opt;
    const int paths = cfg.run.mc_paths;
    if (agent < 0 || agent >= cfg.population.n)
        throw mfg::ConfigError("simulate: --agent out of range");

    const mfg::IntensityPath ip = mfg::solve_intensity_ode(cfg.params, cfg.run.time_steps);
    const mfg::EquilibriumPath ep = mfg::mfe_path(cfg.params, ip);
    const mfg::StrategyProfile profile = mfg::build_nash_profile(cfg.population, ep);

    const std::string csv_path = out_path(cfg, "paths.csv");
    mfg::CsvWriter csv(csv_path, "simulate", cfg);
    const std::string cols[] = {"path_id", "agent", "X_T", "logX_T", "N_T"};
    csv.header(cols);
    for (int j = 0; j < paths; ++j) {
        const uint64_t path_seed = mfg::mix_seed(cfg.run.seed, static_cast<uint64_t>(j));
        const mfg::MarketPath mp =
            mfg::simulate_market(cfg.params, cfg.population, profile, ip.grid, path_seed);
        for (int i = 0; i < cfg.population.n; ++i) {
            const double lx = mp.terminal_log_wealth[static_cast<size_t>(i)];
            const double row[] = {static_cast<double>(j), static_cast<double>(i), std::exp(lx), lx,
                                  static_cast<double>(mp.jump_counts[static_cast<size_t>(i)])};
            csv.row(row);
        }
        if (j == 0 && !dump_hawkes.empty()) {
            std::ofstream os(dump_hawkes, std::ios::binary);
            if (!os) throw std::runtime_error("cannot open dump file: " + dump_hawkes);
            mfg::write_hawkes_dump(os, mp.hawkes);
        }
    }
    csv.close();

    const mfg::ObjectiveEstimate est = mfg::estimate_objective(
        cfg.params, cfg.population, profile, agent, paths, cfg.run.seed, cfg.run.time_steps);
    const std::string json_path = out_path(cfg, "objective.json");
    mfg::write_objective_report(json_path, est, agent, cfg.run.seed, cfg);
    std::printf("simulate: n=%d paths=%d J_%d=%s se=%s -> %s, %s\n", cfg.population.n, paths,
                agent, mfg::format_double(est.mean).c_str(),
                mfg::format_double(est.std_error).c_str(), csv_path.c_str(), json_path.c_str());
    return kExitOk;
}

int run_consistency(const CommonArgs& args, int K, bool ratio_mode, int n_seeds) {
    const mfg::Config cfg = load_effective_config(args);
    const mfg::IntensityPath ip = mfg::solve_intensity_ode(cfg.params, cfg.run.time_steps);
    const mfg::EquilibriumPath ep = mfg::mfe_path(cfg.params, ip);

    if (!ratio_mode) {
        const double dev = mfg::mean_log_wealth_consistency(cfg.params, ep, ip, K, cfg.run.seed);
        std::printf("consistency: K=%d max|exp(mean log X) - m*| = %s\n", K,
                    mfg::format_double(dev).c_str());
        return kExitOk;
    }
    const mfg::ConsistencyRatio cr = mfg::consistency_ratio_experiment(
        cfg.params, K, n_seeds, cfg.run.seed, cfg.run.time_steps);
    std::printf("consistency: K=%d vs 4K over %d seeds, mean deviation ratio = %.4f (se %.4f)\n",
                K, n_seeds, cr.mean_ratio, cr.se_ratio);
    if (args.check) {
        if (!(cr.mean_ratio >= 1.4 && cr.mean_ratio <= 2.8)) {
            std::printf("consistency: check FAILED (ratio outside [1.4, 2.8])\n");
            return kExitCheckFailed;
        }
        std::printf("consistency: check passed\n");
    }
    return kExitOk;
}

int run_verify(const CommonArgs& args, const std::string& metric, const std::string& n_list,
               std::optional<int> paths_opt, const std::string& family_name, int grid_steps) {
    mfg::Config cfg = load_effective_config(args);
    if (paths_opt) cfg.run.mc_paths = *paths_opt;
    const std::vector<int> n_values = parse_int_list(n_list);
    const double pert = cfg.population.perturbation;

    mfg::RateExperiment e;
    if (metric == "intensity-mse") {
        e = mfg::intensity_mse_experiment(cfg.params, pert, n_values, cfg.run.mc_paths,
                                          cfg.run.seed, grid_steps);
    } else if (metric == "wealth-mse") {
        e = mfg::geom_wealth_mse_experiment(cfg.params, pert, n_values, cfg.run.mc_paths,
                                            cfg.run.seed, grid_steps);
    } else if (metric == "nash-gain") {
        e = mfg::nash_gain_experiment(cfg.params, pert, n_values, mfg::parse_family(family_name),
                                      cfg.run.mc_paths, cfg.run.seed, grid_steps);
    } else {
        throw mfg::ConfigError("verify: unknown metric " + metric);
    }

    const std::string json_path = out_path(cfg, "verify_" + metric + ".json");
    mfg::write_rate_report(json_path, e, cfg, "verify --metric " + metric);
    std::printf("verify %s: slope=%.4f (se %.4f)", metric.c_str(), e.slope, e.slope_se);
    for (const auto& r : e.rows) std::printf("  n=%d:%.3e", r.n, r.value);
    std::printf(" -> %s\n", json_path.c_str());

    if (args.check) {
        bool ok = true;
        if (metric == "intensity-mse") ok = e.slope >= -2.5 && e.slope <= -1.5;
        if (metric == "wealth-mse") ok = e.slope <= -0.3;
        if (metric == "nash-gain") ok = mfg::gain_decay_acceptable(e);
        if (!ok) {
            std::printf("verify: check FAILED\n");
            return kExitCheckFailed;
        }
        std::printf("verify: check passed\n");
    }
    return kExitOk;
}

int run_oracle_check(const CommonArgs& args, const std::string& pi_list,
                     std::optional<int> paths_opt) {
    mfg::Config cfg = load_effective_config(args);
    if (paths_opt) cfg.run.mc_paths = *paths_opt;
    const std::vector<double> pis = parse_double_list(pi_list);
    const mfg::IntensityPath ip = mfg::solve_intensity_ode(cfg.params, cfg.run.time_steps);

    bool ok = true;
    for (double pi : pis) {
        if (!(pi < 1.0)) throw mfg::ConfigError("oracle-check: pi must be < 1");
        const mfg::ObjectiveEstimate est = mfg::estimate_objective_limiting(
            cfg.params, ip, pi, cfg.run.mc_paths, cfg.run.seed);
        const double oracle = mfg::crra_moment_oracle(cfg.params, ip, pi);
        const double z = (est.mean - oracle) / est.std_error;
        std::printf("oracle-check: pi=%g mc=%s se=%s closed=%s z=%+.2f\n", pi,
                    mfg::format_double(est.mean).c_str(),
                    mfg::format_double(est.std_error).c_str(),
                    mfg::format_double(oracle).c_str(), z);
        ok = ok && std::fabs(z) <= 3.0;
    }
    if (args.check) {
        if (!ok) {
            std::printf("oracle-check: check FAILED (outside 3 SE)\n");
            return kExitCheckFailed;
        }
        std::printf("oracle-check: check passed\n");
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mean-field equilibrium and finite-player market experiments for the CRRA "
                 "relative-performance game with contagious jump risk"};
    app.require_subcommand(1);

    CommonArgs a_mfe, a_sens, a_sim, a_cons, a_verify, a_oracle;

    auto* c_mfe = app.add_subcommand("mfe-path", "deterministic equilibrium path -> CSV");
    add_common(c_mfe, a_mfe);

    auto* c_sens = app.add_subcommand("sensitivity", "pi* as a function of one model parameter");
    std::string sens_param;
    double sens_from = 0.1, sens_to = 1.0, sens_t = 3.0;
    int sens_points = 50;
    c_sens->add_option("--param", sens_param, "parameter name")->required();
    c_sens->add_option("--from", sens_from, "first value")->required();
    c_sens->add_option("--to", sens_to, "last value")->required();
    c_sens->add_option("--points", sens_points, "grid size (default 50)");
    c_sens->add_option("--t", sens_t, "evaluation time (default 3)");
    add_common(c_sens, a_sens);

    auto* c_sim = app.add_subcommand("simulate", "n-player market under the Nash profile");
    std::optional<int> sim_paths;
    int sim_agent = 0;
    std::string sim_dump;
    c_sim->add_option("--paths", sim_paths, "Monte Carlo paths (default run.mc_paths)");
    c_sim->add_option("--agent", sim_agent, "agent for the objective estimate (default 0)");
    c_sim->add_option("--dump-hawkes", sim_dump, "binary jump dump of path 0");
    add_common(c_sim, a_sim);

    auto* c_cons = app.add_subcommand("consistency", "mean-field consistency diagnostic");
    int cons_k = 10000, cons_seeds = 20;
    bool cons_ratio = false;
    c_cons->add_option("--k", cons_k, "representative agents (default 10000)");
    c_cons->add_flag("--ratio", cons_ratio, "K vs 4K deviation ratio over seeds");
    c_cons->add_option("--seeds", cons_seeds, "master seeds for --ratio (default 20)");
    add_common(c_cons, a_cons);

    auto* c_verify = app.add_subcommand("verify", "convergence-rate experiments");
    std::string verify_metric, verify_n = "16,32,64,128", verify_family = "constant-shift";
    std::optional<int> verify_paths;
    int verify_grid = 250;
    c_verify->add_option("--metric", verify_metric, "intensity-mse | wealth-mse | nash-gain")
        ->required();
    c_verify->add_option("--n", verify_n, "population sizes, comma separated");
    c_verify->add_option("--paths", verify_paths, "Monte Carlo paths per n");
    c_verify->add_option("--family", verify_family,
                         "nash-gain family: constant-shift | constant-strategy | scaled-mfe");
    c_verify->add_option("--grid-steps", verify_grid, "time grid steps (default 250)");
    add_common(c_verify, a_verify);

    auto* c_oracle = app.add_subcommand("oracle-check", "Monte Carlo vs closed-form moment");
    std::string oracle_pis = "0.1,0.3,0.6";
    std::optional<int> oracle_paths;
    c_oracle->add_option("--pi", oracle_pis, "strategy values, comma separated");
    c_oracle->add_option("--paths", oracle_paths, "Monte Carlo paths (default run.mc_paths)");
    add_common(c_oracle, a_oracle);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints usage or message
        return e.get_exit_code() == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (c_mfe->parsed()) return run_mfe_path(a_mfe);
        if (c_sens->parsed())
            return run_sensitivity(a_sens, sens_param, sens_from, sens_to, sens_points, sens_t);
        if (c_sim->parsed()) return run_simulate(a_sim, sim_paths, sim_agent, sim_dump);
        if (c_cons->parsed()) return run_consistency(a_cons, cons_k, cons_ratio, cons_seeds);
        if (c_verify->parsed())
            return run_verify(a_verify, verify_metric, verify_n, verify_paths, verify_family,
                              verify_grid);
        if (c_oracle->parsed()) return run_oracle_check(a_oracle, oracle_pis, oracle_paths);
    } catch (const mfg::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return kExitNumerical;
    }
    return kExitConfig;
}
