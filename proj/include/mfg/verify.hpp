#pragma once

#include "mfg/market.hpp"
#include "mfg/meanfield.hpp"
#include "mfg/model.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mfg {

enum class RateMetric { IntensityMse, GeomWealthMse, NashGain };

std::string metric_name(RateMetric metric);

struct RateRow {
    int n = 0;
    double value = 0.0;
    double se = 0.0;
};

struct RateExperiment {
    RateMetric metric{};
    std::vector<RateRow> rows;
    double slope = 0.0;
    double slope_se = 0.0;
    int floored = 0;           // gains clipped at zero before the log-log fit
    double spearman_nk = 0.0;  // rank correlation of (n, value); NashGain only
    uint64_t seed = 0;
};

struct SlopeFit {
    double slope = 0.0;
    double stderr_slope = 0.0;
};

/// OLS of log(value) on log(n). Throws std::domain_error on a nonpositive
/// value (callers floor or drop first) and std::invalid_argument on < 2 rows.
SlopeFit fit_loglog_slope(std::span<const std::pair<double, double>> rows);

/// Per n: Monte Carlo estimate of max_t E|mean_i f(lambda_t^{i,n}) -
/// lambda_t^{f,o}|^2 on the grid, with the SE taken at the maximizing grid
/// point; then the log-log slope across n.
RateExperiment intensity_mse_experiment(const MeanFieldParams& p, double perturbation,
                                        std::span<const int> n_values, int mc_paths,
                                        uint64_t seed, int grid_steps);

/// Per n: max_t E|X_bar_t - m*_t|^2 with the n-player run and the m*
/// functional coupled through the same W0 increments path by path.
RateExperiment geom_wealth_mse_experiment(const MeanFieldParams& p, double perturbation,
                                          std::span<const int> n_values, int mc_paths,
                                          uint64_t seed, int grid_steps);

/// Parametric families probing unilateral deviations of agent 0 from the
/// approximate-Nash profile; a lower bound on the true best-response gain.
struct DeviationFamily {
    enum class Kind { ConstantShift, ConstantStrategy, ScaledMfe };
    Kind kind = Kind::ConstantShift;
    std::vector<double> values;

    static DeviationFamily constant_shift();     // {0, +-0.02, +-0.05, +-0.1, +-0.2}
    static DeviationFamily constant_strategy();  // {0, 0.1, ..., 0.9}
    static DeviationFamily scaled_mfe();         // {0.5, 0.75, 1.0, 1.25, 1.5}
};

DeviationFamily parse_family(const std::string& name);

/// Per n: gain(n) = max over the family of mean[J_0(deviation) -
/// J_0(baseline)] under common random numbers (identical Hawkes realization
/// and Brownian draws), floored at 0; SE from the per-path differences of the
/// maximizing member. Slope fit uses log(gain + machine epsilon).
RateExperiment nash_gain_experiment(const MeanFieldParams& p, double perturbation,
                                    std::span<const int> n_values, const DeviationFamily& family,
                                    int mc_paths, uint64_t seed, int grid_steps);

/// Accept rule for the gain decay: Spearman(n, gain) <= 0, or every gain
/// within 3 SE of some non-increasing envelope.
bool gain_decay_acceptable(const RateExperiment& e);

struct ConsistencyRatio {
    double mean_ratio = 0.0;
    double se_ratio = 0.0;
    std::vector<double> ratios;  // one per master seed: deviation(K) / deviation(4K)
};

/// mean_log_wealth_consistency at K and 4K (same W0 coupling per seed),
/// averaged over n_seeds master seeds.
ConsistencyRatio consistency_ratio_experiment(const MeanFieldParams& p, int K, int n_seeds,
                                              uint64_t master_seed, int grid_steps);

}  // namespace mfg
