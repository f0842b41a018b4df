#pragma once

#include "mfg/hawkes.hpp"
#include "mfg/meanfield.hpp"
#include "mfg/model.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace mfg {

enum class StrategyKind { MfeFeedback, FixedPath, ConstantValue };

/// Per-agent control rule. MfeFeedback solves the agent's equilibrium
/// equation at the current intensity (the approximate-Nash construction);
/// shift/scale modify the solved value (deviation families). Modified or
/// constant values are admissibility-capped at 1 - eps0.
struct AgentStrategy {
    StrategyKind kind = StrategyKind::MfeFeedback;
    double constant = 0.0;      // ConstantValue
    std::vector<double> path;   // FixedPath: one value per grid step
    double shift = 0.0;         // MfeFeedback: applied after the solve
    double scale = 1.0;

    static AgentStrategy feedback() { return {}; }
    static AgentStrategy constant_value(double v) {
        AgentStrategy s;
        s.kind = StrategyKind::ConstantValue;
        s.constant = v;
        return s;
    }
    static AgentStrategy fixed_path(std::vector<double> values) {
        AgentStrategy s;
        s.kind = StrategyKind::FixedPath;
        s.path = std::move(values);
        return s;
    }
};

struct StrategyProfile {
    std::vector<AgentStrategy> agents;
    std::vector<double> pi_star;  // MFE values on the grid (competition term)
    double tol = 1e-14;
};

/// Every agent plays the feedback rule phi_i(t, Lambda_t^{f,i,n}).
StrategyProfile build_nash_profile(const PopulationSpec& pop, const EquilibriumPath& ep);

/// Root of the per-agent equation
///   Phi_i(pi) = (gamma_i-1)[sigma_i^2+(sigma_i0)^2] pi
///               - theta_i gamma_i sigma_i0 sigma0 pi*_t
///               - lambda (1-pi)^{gamma_i-1} + lambda + b_i
/// in (-inf, 1). The bracket starts at [0, 1-1e-15] and doubles leftward
/// while Phi_i(left) < 0 (the root may be negative). For lambda = 0 the
/// linear closed form is returned.
double phi_i(double pi, double lambda, const AgentType& o_i, double sigma0_limit,
             double pi_star_t);
double solve_phi_i(double lambda, const AgentType& o_i, double sigma0_limit, double pi_star_t,
                   double tol = 1e-14, double guess = 0.5);

struct MarketOptions {
    bool record_log_matrix = false;
    bool record_controls = false;
};

struct MarketPath {
    HawkesPath hawkes;
    std::vector<double> w0;                        // Delta W0 per step
    std::vector<double> mean_log_wealth;           // per grid point
    std::vector<double> terminal_log_wealth;       // per agent
    std::vector<uint32_t> jump_counts;             // per agent, N_T
    std::vector<std::vector<double>> log_wealth;   // optional, [agent][grid]
    std::vector<std::vector<double>> controls;     // optional, [agent][step]
};

/// Log-wealth scheme: controls frozen at the left grid endpoint (predictable),
/// per-step increment
///   (r + (b_i + Lambda_i) pi - (sigma_i^2 + (sigma_i0)^2) pi^2 / 2) dt
///   + pi sigma_i dW_i + pi sigma_i0 dW0,
/// jumps applied at their exact times as log(1 - pi) with the pre-jump
/// control. Lambda_i = f(factor) is frozen at the left endpoint as well.
MarketPath simulate_market(const MeanFieldParams& p, const PopulationSpec& pop,
                           const StrategyProfile& profile, std::span<const double> grid,
                           uint64_t path_seed, const MarketOptions& opts = {});

/// Wealth evolution on a given point-process realization (the Brownian
/// streams are re-derived from path_seed, so reruns on the same inputs are
/// bitwise identical). Used directly by the deviation experiments and by the
/// structural predictability tests.
MarketPath evolve_wealth(const MeanFieldParams& p, const PopulationSpec& pop,
                         const StrategyProfile& profile, std::span<const double> grid,
                         HawkesPath hawkes, uint64_t path_seed, const MarketOptions& opts = {});

/// Re-evolves a single agent's log-wealth under a replacement strategy with
/// the identical noise and jump realization; returns the terminal log-wealth.
double evolve_single_agent(const MeanFieldParams& p, const PopulationSpec& pop,
                           const StrategyProfile& profile, const AgentStrategy& replacement,
                           int agent, std::span<const double> grid, const HawkesPath& hawkes,
                           uint64_t path_seed);

struct ObjectiveEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    int64_t paths = 0;
};

/// Monte Carlo estimate of J_i = E[(1/gamma_i) (X_T^i)^{gamma_i}
/// (X_bar_T)^{-theta_i gamma_i}] with the geometric mean computed in log
/// space. Paths run in parallel; the reduction is deterministic.
ObjectiveEstimate estimate_objective(const MeanFieldParams& p, const PopulationSpec& pop,
                                     const StrategyProfile& profile, int agent,
                                     int mc_paths, uint64_t seed, int grid_steps);

/// One representative agent of the limiting model: deterministic intensity
/// lambda_f from ip (jumps by thinning), strategy frozen per step, per-step
/// deterministic drift integrated by trapezoid. Fills log X on the grid.
void simulate_rep_path(const MeanFieldParams& p, const IntensityPath& ip,
                       std::span<const double> pi_step, std::span<const double> w0_increments,
                       uint64_t agent_seed, std::span<double> log_out);

/// Limiting-model objective estimate for a constant strategy and theta = 0:
/// E[(1/gamma) X_T^gamma] over independent paths (own W0 per path).
ObjectiveEstimate estimate_objective_limiting(const MeanFieldParams& p, const IntensityPath& ip,
                                              double pi_const, int mc_paths, uint64_t seed);

/// Closed-form moment of the limiting model for constant pi and theta = 0:
///   (x0^g / g) exp( int_0^T { g [r + b pi + (g-1) pi^2 (sigma^2+(sigma0)^2)/2]
///                             + ((1-pi)^g + g pi - 1) lambda_f(s) } ds ),
/// the intensity integral taken by trapezoid on ip's grid.
double crra_moment_oracle(const MeanFieldParams& p, const IntensityPath& ip, double pi_const);

/// Consistency diagnostic of the mean-field fixed point: K independent
/// representative agents share one W0 path; returns
/// max_t | exp(mean log X_t) - m*_t | with m* built from the same W0.
double mean_log_wealth_consistency(const MeanFieldParams& p, const EquilibriumPath& ep,
                                   const IntensityPath& ip, int K, uint64_t seed);

}  // namespace mfg
