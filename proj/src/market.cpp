#include "mfg/market.hpp"

#include "mfg/numerics.hpp"
#include "mfg/parallel.hpp"
#include "mfg/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace mfg {

namespace {

constexpr uint64_t kStreamRepAgent = 0x5245u;
constexpr double kAdmissibilityFloor = -1e6;  // D0 clamp; unreachable in practice

}  // namespace

StrategyProfile build_nash_profile(const PopulationSpec& pop, const EquilibriumPath& ep) {
    StrategyProfile profile;
    profile.agents.assign(static_cast<size_t>(pop.n), AgentStrategy::feedback());
    profile.pi_star = ep.pi_star;
    return profile;
}

double phi_i(double pi, double lambda, const AgentType& o_i, double sigma0_limit,
             double pi_star_t) {
    if (pi >= 1.0) throw std::domain_error("phi_i: pi must be < 1");
    const double vol2 = o_i.sigma * o_i.sigma + o_i.sigma0 * o_i.sigma0;
    return (o_i.gamma - 1.0) * vol2 * pi -
           o_i.theta * o_i.gamma * o_i.sigma0 * sigma0_limit * pi_star_t -
           lambda * std::expm1((o_i.gamma - 1.0) * std::log1p(-pi)) + o_i.b;
}

double solve_phi_i(double lambda, const AgentType& o_i, double sigma0_limit, double pi_star_t,
                   double tol, double guess) {
    if (!(tol > 0.0)) throw std::invalid_argument("solve_phi_i: tol must be > 0");
    if (lambda < 0.0) throw std::domain_error("solve_phi_i: lambda must be >= 0");
    const double vol2 = o_i.sigma * o_i.sigma + o_i.sigma0 * o_i.sigma0;
    const double comp = o_i.theta * o_i.gamma * o_i.sigma0 * sigma0_limit * pi_star_t;
    if (lambda == 0.0) return (o_i.b - comp) / ((1.0 - o_i.gamma) * vol2);

    double hi = 1.0 - 1e-15;  // Phi_i(hi) < 0
    double lo = 0.0;
    double flo = phi_i(lo, lambda, o_i, sigma0_limit, pi_star_t);
    double width = 1.0;
    while (flo < 0.0) {  // the root may be negative: double the bracket leftward
        lo -= width;
        width *= 2.0;
        if (lo < kAdmissibilityFloor)
            throw std::runtime_error("solve_phi_i: bracket fell below the admissibility floor");
        flo = phi_i(lo, lambda, o_i, sigma0_limit, pi_star_t);
    }
    if (flo == 0.0) return lo;

    double pi = (guess > lo && guess < hi) ? guess : 0.5 * (lo + hi);
    double fpi = phi_i(pi, lambda, o_i, sigma0_limit, pi_star_t);
    auto dphi = [&](double x) {
        return (o_i.gamma - 1.0) * vol2 +
               (o_i.gamma - 1.0) * lambda * std::pow(1.0 - x, o_i.gamma - 2.0);
    };
    for (int it = 0; it < 200; ++it) {
        if (fpi > 0.0)
            lo = pi;
        else
            hi = pi;
        double next = pi - fpi / dphi(pi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        const double step = std::fabs(next - pi);
        pi = next;
        fpi = phi_i(pi, lambda, o_i, sigma0_limit, pi_star_t);
        if (std::fabs(fpi) <= tol &&
            step <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(pi)))
            return pi;
    }
    if (std::fabs(fpi) <= tol) return pi;
    throw std::runtime_error("solve_phi_i: no convergence in 200 iterations");
}

namespace {

// Shared root cache for feedback controls. Factors change only at jumps, so
// (step, quantized lambda) repeats heavily; in homogeneous populations every
// agent shares the same equation and the cache collapses the work to one
// solve per step per distinct intensity value.
struct RootKey {
    int64_t step;
    int64_t qlambda;
    bool operator==(const RootKey& o) const { return step == o.step && qlambda == o.qlambda; }
};

struct RootKeyHash {
    size_t operator()(const RootKey& k) const {
        return static_cast<size_t>(mix_seed(static_cast<uint64_t>(k.step),
                                            static_cast<uint64_t>(k.qlambda)));
    }
};

using RootCache = std::unordered_map<RootKey, double, RootKeyHash>;

struct ControlContext {
    const MeanFieldParams* p;
    const StrategyProfile* profile;
    double sigma0_limit;
    RootCache* cache;  // nullable (heterogeneous agents do not share roots)
};

double control_value(const ControlContext& ctx, const AgentStrategy& strat, const AgentType& o_i,
                     size_t step, double lambda, double& warm_start) {
    double value;
    switch (strat.kind) {
        case StrategyKind::ConstantValue:
            value = strat.constant;
            break;
        case StrategyKind::FixedPath:
            value = strat.path.at(step);
            break;
        case StrategyKind::MfeFeedback: {
            double root;
            const RootKey key{static_cast<int64_t>(step), llround(lambda * 1e9)};
            if (ctx.cache) {
                auto it = ctx.cache->find(key);
                if (it != ctx.cache->end()) {
                    root = it->second;
                } else {
                    root = solve_phi_i(lambda, o_i, ctx.sigma0_limit,
                                       ctx.profile->pi_star[step], ctx.profile->tol, warm_start);
                    ctx.cache->emplace(key, root);
                }
            } else {
                root = solve_phi_i(lambda, o_i, ctx.sigma0_limit, ctx.profile->pi_star[step],
                                   ctx.profile->tol, warm_start);
            }
            warm_start = root;
            value = strat.scale * root + strat.shift;
            break;
        }
        default:
            value = 0.0;
    }
    value = std::min(value, 1.0 - ctx.p->eps0);
    if (value < kAdmissibilityFloor)
        throw std::runtime_error("control_value: strategy fell below the admissibility floor");
    return value;
}

// Advances one agent across the whole horizon. jump_steps holds the step
// index of every jump of this agent's component, ascending. log_out, if
// non-null, receives log X on the grid (size steps+1); controls_out, if
// non-null, the per-step control. Returns terminal log X.
double evolve_agent(const ControlContext& ctx, const AgentType& o_i, const AgentStrategy& strat,
                    std::span<const double> grid, const HawkesPath& hawkes, int agent,
                    std::span<const size_t> jump_steps, std::span<const double> w0, Rng& wi_rng,
                    double* mean_accum, double* log_out, double* controls_out) {
    const size_t steps = grid.size() - 1;
    double log_x = std::log(o_i.x0);
    if (log_out) log_out[0] = log_x;
    if (mean_accum) mean_accum[0] += log_x;
    size_t jp = 0;
    double warm = 0.5;
    const double vol2 = o_i.sigma * o_i.sigma + o_i.sigma0 * o_i.sigma0;
    for (size_t k = 0; k < steps; ++k) {
        const double dt = grid[k + 1] - grid[k];
        const double lambda = ctx.p->f.value(hawkes.factor_at(k, agent));
        const double pi = control_value(ctx, strat, o_i, k, lambda, warm);
        if (controls_out) controls_out[k] = pi;
        while (jp < jump_steps.size() && jump_steps[jp] == k) {
            log_x += std::log1p(-pi);
            ++jp;
        }
        const double dw = wi_rng.normal() * std::sqrt(dt);
        log_x += (ctx.p->r + (o_i.b + lambda) * pi - 0.5 * vol2 * pi * pi) * dt +
                 pi * o_i.sigma * dw + pi * o_i.sigma0 * w0[k];
        if (log_out) log_out[k + 1] = log_x;
        if (mean_accum) mean_accum[k + 1] += log_x;
    }
    return log_x;
}

std::vector<std::vector<size_t>> jumps_by_component(const HawkesPath& hawkes,
                                                    std::span<const double> grid, int n) {
    std::vector<std::vector<size_t>> by_comp(static_cast<size_t>(n));
    for (const auto& j : hawkes.jumps) {
        // jump in (t_k, t_{k+1}]: first grid point >= time, minus one
        const auto it = std::lower_bound(grid.begin(), grid.end(), j.time);
        size_t k = static_cast<size_t>(it - grid.begin());
        if (k > 0) --k;
        if (k >= grid.size() - 1) k = grid.size() - 2;
        by_comp[j.component].push_back(k);
    }
    return by_comp;
}

std::vector<double> draw_w0(std::span<const double> grid, uint64_t path_seed) {
    const size_t steps = grid.size() - 1;
    std::vector<double> w0(steps);
    Rng rng(mix_seed(path_seed, kStreamCommon));
    for (size_t k = 0; k < steps; ++k) w0[k] = rng.normal() * std::sqrt(grid[k + 1] - grid[k]);
    return w0;
}

}  // namespace

MarketPath evolve_wealth(const MeanFieldParams& p, const PopulationSpec& pop,
                         const StrategyProfile& profile, std::span<const double> grid,
                         HawkesPath hawkes, uint64_t path_seed, const MarketOptions& opts) {
    const int n = pop.n;
    const size_t steps = grid.size() - 1;
    if (profile.agents.size() != static_cast<size_t>(n))
        throw std::invalid_argument("evolve_wealth: profile size mismatch");
    if (!profile.pi_star.empty() && profile.pi_star.size() != grid.size())
        throw std::invalid_argument("evolve_wealth: pi_star not aligned with grid");

    MarketPath mp;
    mp.w0 = draw_w0(grid, path_seed);
    mp.mean_log_wealth.assign(grid.size(), 0.0);
    mp.terminal_log_wealth.resize(static_cast<size_t>(n));
    mp.jump_counts.assign(static_cast<size_t>(n), 0);
    for (const auto& j : hawkes.jumps) mp.jump_counts[j.component] += 1;
    if (opts.record_log_matrix)
        mp.log_wealth.assign(static_cast<size_t>(n), std::vector<double>(grid.size()));
    if (opts.record_controls)
        mp.controls.assign(static_cast<size_t>(n), std::vector<double>(steps));

    RootCache cache;
    ControlContext ctx{&p, &profile, p.o.sigma0, pop.homogeneous() ? &cache : nullptr};
    const auto by_comp = jumps_by_component(hawkes, grid, n);

    for (int i = 0; i < n; ++i) {
        Rng wi_rng(mix_seed(path_seed, kStreamIdio, static_cast<uint64_t>(i)));
        const size_t ui = static_cast<size_t>(i);
        mp.terminal_log_wealth[ui] = evolve_agent(
            ctx, pop.agents[ui], profile.agents[ui], grid, hawkes, i, by_comp[ui], mp.w0, wi_rng,
            mp.mean_log_wealth.data(), opts.record_log_matrix ? mp.log_wealth[ui].data() : nullptr,
            opts.record_controls ? mp.controls[ui].data() : nullptr);
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (auto& v : mp.mean_log_wealth) v *= inv_n;
    mp.hawkes = std::move(hawkes);
    return mp;
}

MarketPath simulate_market(const MeanFieldParams& p, const PopulationSpec& pop,
                           const StrategyProfile& profile, std::span<const double> grid,
                           uint64_t path_seed, const MarketOptions& opts) {
    HawkesPath hp = simulate_hawkes(pop, p.f, grid.back(), grid, path_seed);
    return evolve_wealth(p, pop, profile, grid, std::move(hp), path_seed, opts);
}

double evolve_single_agent(const MeanFieldParams& p, const PopulationSpec& pop,
                           const StrategyProfile& profile, const AgentStrategy& replacement,
                           int agent, std::span<const double> grid, const HawkesPath& hawkes,
                           uint64_t path_seed) {
    // Fresh cache: for agent 0 the warm-start chain then matches the full
    // run's (agent 0 is evolved first there), so an unmodified replacement
    // reproduces the baseline terminal log-wealth bitwise.
    RootCache cache;
    ControlContext ctx{&p, &profile, p.o.sigma0, pop.homogeneous() ? &cache : nullptr};
    const auto w0 = draw_w0(grid, path_seed);
    const auto by_comp = jumps_by_component(hawkes, grid, pop.n);
    Rng wi_rng(mix_seed(path_seed, kStreamIdio, static_cast<uint64_t>(agent)));
    const size_t ua = static_cast<size_t>(agent);
    return evolve_agent(ctx, pop.agents[ua], replacement, grid, hawkes, agent, by_comp[ua], w0,
                        wi_rng, nullptr, nullptr, nullptr);
}

ObjectiveEstimate estimate_objective(const MeanFieldParams& p, const PopulationSpec& pop,
                                     const StrategyProfile& profile, int agent,
                                     int mc_paths, uint64_t seed, int grid_steps) {
    if (mc_paths < 1) throw std::invalid_argument("estimate_objective: mc_paths must be >= 1");
    if (agent < 0 || agent >= pop.n) throw std::out_of_range("estimate_objective: agent index");
    const auto grid = make_grid(p.T, grid_steps);
    const AgentType& o_i = pop.agents[static_cast<size_t>(agent)];
    std::vector<double> utilities(static_cast<size_t>(mc_paths));
    parallel_for(mc_paths, [&](int64_t j) {
        const uint64_t path_seed = mix_seed(seed, static_cast<uint64_t>(j));
        const MarketPath mp = simulate_market(p, pop, profile, grid, path_seed);
        const double log_xi = mp.terminal_log_wealth[static_cast<size_t>(agent)];
        const double log_xbar = mp.mean_log_wealth.back();
        utilities[static_cast<size_t>(j)] =
            std::exp(o_i.gamma * log_xi - o_i.theta * o_i.gamma * log_xbar) / o_i.gamma;
    });
    const MeanSe ms = mean_and_se(utilities);
    return {ms.mean, ms.se, mc_paths};
}

void simulate_rep_path(const MeanFieldParams& p, const IntensityPath& ip,
                       std::span<const double> pi_step, std::span<const double> w0_increments,
                       uint64_t agent_seed, std::span<double> log_out) {
    const size_t steps = ip.grid.size() - 1;
    if (pi_step.size() != steps || w0_increments.size() != steps || log_out.size() != steps + 1)
        throw std::invalid_argument("simulate_rep_path: size mismatch");
    const AgentType& o = p.o;
    const double vol2 = o.sigma * o.sigma + o.sigma0 * o.sigma0;
    const double dt = ip.dt();

    // Jumps of the driving Poisson process with deterministic intensity
    // lambda_f: thinning against the global maximum, intensity linearly
    // interpolated between grid nodes.
    double lam_max = 0.0;
    for (double v : ip.lambda_f) lam_max = std::max(lam_max, v);
    std::vector<size_t> jump_steps;
    if (lam_max > 0.0) {
        Rng jrng(mix_seed(agent_seed, kStreamJumps));
        double t = 0.0;
        for (;;) {
            t += jrng.exponential(lam_max);
            if (t > p.T) break;
            size_t k = static_cast<size_t>(t / dt);
            if (k >= steps) k = steps - 1;
            const double w = (t - ip.grid[k]) / dt;
            const double lam_t = (1.0 - w) * ip.lambda_f[k] + w * ip.lambda_f[k + 1];
            if (jrng.uniform01() * lam_max <= lam_t) jump_steps.push_back(k);
        }
    }

    Rng wrng(mix_seed(agent_seed, kStreamIdio));
    double log_x = std::log(o.x0);
    log_out[0] = log_x;
    size_t jp = 0;
    for (size_t k = 0; k < steps; ++k) {
        const double pi = pi_step[k];
        const double lam_bar = 0.5 * (ip.lambda_f[k] + ip.lambda_f[k + 1]);
        while (jp < jump_steps.size() && jump_steps[jp] == k) {
            log_x += std::log1p(-pi);
            ++jp;
        }
        const double dw = wrng.normal() * std::sqrt(dt);
        log_x += (p.r + (o.b + lam_bar) * pi - 0.5 * vol2 * pi * pi) * dt + pi * o.sigma * dw +
                 pi * o.sigma0 * w0_increments[k];
        log_out[k + 1] = log_x;
    }
}

ObjectiveEstimate estimate_objective_limiting(const MeanFieldParams& p, const IntensityPath& ip,
                                              double pi_const, int mc_paths, uint64_t seed) {
    if (mc_paths < 1)
        throw std::invalid_argument("estimate_objective_limiting: mc_paths must be >= 1");
    const size_t steps = ip.grid.size() - 1;
    const std::vector<double> pi_step(steps, pi_const);
    std::vector<double> utilities(static_cast<size_t>(mc_paths));
    parallel_for(mc_paths, [&](int64_t j) {
        const uint64_t path_seed = mix_seed(seed, static_cast<uint64_t>(j));
        std::vector<double> w0(steps);
        Rng w0rng(mix_seed(path_seed, kStreamCommon));
        const double dt = ip.dt();
        for (auto& v : w0) v = w0rng.normal() * std::sqrt(dt);
        std::vector<double> log_path(steps + 1);
        simulate_rep_path(p, ip, pi_step, w0, path_seed, log_path);
        utilities[static_cast<size_t>(j)] = std::exp(p.o.gamma * log_path.back()) / p.o.gamma;
    });
    const MeanSe ms = mean_and_se(utilities);
    return {ms.mean, ms.se, mc_paths};
}

double crra_moment_oracle(const MeanFieldParams& p, const IntensityPath& ip, double pi_const) {
    const AgentType& o = p.o;
    const double vol2 = o.sigma * o.sigma + o.sigma0 * o.sigma0;
    double int_lambda = 0.0;
    for (size_t k = 0; k + 1 < ip.grid.size(); ++k)
        int_lambda += 0.5 * (ip.grid[k + 1] - ip.grid[k]) * (ip.lambda_f[k] + ip.lambda_f[k + 1]);
    const double drift = o.gamma * (p.r + o.b * pi_const +
                                    0.5 * (o.gamma - 1.0) * pi_const * pi_const * vol2) * p.T;
    const double jump = (std::pow(1.0 - pi_const, o.gamma) + o.gamma * pi_const - 1.0) * int_lambda;
    return std::pow(o.x0, o.gamma) / o.gamma * std::exp(drift + jump);
}

double mean_log_wealth_consistency(const MeanFieldParams& p, const EquilibriumPath& ep,
                                   const IntensityPath& ip, int K, uint64_t seed) {
    if (K < 2) throw std::invalid_argument("mean_log_wealth_consistency: K must be >= 2");
    const size_t steps = ip.grid.size() - 1;
    std::vector<double> pi_step(steps);
    for (size_t k = 0; k < steps; ++k) pi_step[k] = ep.pi_star[k];

    std::vector<double> w0(steps);
    {
        Rng w0rng(mix_seed(seed, kStreamCommon));
        const double dt = ip.dt();
        for (auto& v : w0) v = w0rng.normal() * std::sqrt(dt);
    }
    const std::vector<double> m_star = m_star_from_increments(p, ep, w0);

    // Fixed-size agent blocks with an index-ordered reduction: totals are
    // independent of the worker count.
    constexpr int kBlock = 256;
    const int blocks = (K + kBlock - 1) / kBlock;
    std::vector<std::vector<double>> partial(static_cast<size_t>(blocks));
    parallel_for(blocks, [&](int64_t bi) {
        auto& acc = partial[static_cast<size_t>(bi)];
        acc.assign(steps + 1, 0.0);
        std::vector<double> log_path(steps + 1);
        const int lo = static_cast<int>(bi) * kBlock;
        const int hi = std::min(K, lo + kBlock);
        for (int a = lo; a < hi; ++a) {
            const uint64_t agent_seed = mix_seed(seed, kStreamRepAgent, static_cast<uint64_t>(a));
            simulate_rep_path(p, ip, pi_step, w0, agent_seed, log_path);
            for (size_t k = 0; k <= steps; ++k) acc[k] += log_path[k];
        }
    });
    double dev = 0.0;
    for (size_t k = 0; k <= steps; ++k) {
        double s = 0.0;
        for (const auto& acc : partial) s += acc[k];
        dev = std::max(dev, std::fabs(std::exp(s / static_cast<double>(K)) - m_star[k]));
    }
    return dev;
}

}  // namespace mfg
