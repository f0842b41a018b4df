#include "mfg/hawkes.hpp"

#include "mfg/numerics.hpp"
#include "mfg/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace mfg {

double decay_factor(double lambda, double alpha, double lambda_inf, double dt) {
    if (dt < 0.0) throw std::domain_error("decay_factor: dt must be >= 0");
    return lambda_inf + (lambda - lambda_inf) * std::exp(-alpha * dt);
}

void apply_jump(HawkesState& state, int j, const PopulationSpec& pop) {
    const int n = pop.n;
    if (j < 0 || j >= n) throw std::out_of_range("apply_jump: component index out of range");
    const double emit = pop.agents[static_cast<size_t>(j)].varsigma / static_cast<double>(n);
    for (int i = 0; i < n; ++i)
        state.lambda_factors[static_cast<size_t>(i)] += pop.agents[static_cast<size_t>(i)].beta * emit;
    state.counts[static_cast<size_t>(j)] += 1;
}

HawkesPath simulate_hawkes(const PopulationSpec& pop, const JumpRateFn& fn, double T,
                           std::span<const double> grid, uint64_t seed) {
    const int n = pop.n;
    if (grid.size() < 2 || grid.front() != 0.0 || grid.back() != T)
        throw std::invalid_argument("simulate_hawkes: grid must span [0, T]");

    HawkesPath path;
    path.n = n;
    path.grid.assign(grid.begin(), grid.end());
    path.factor_snapshots.resize(grid.size() * static_cast<size_t>(n));

    HawkesState state;
    state.t = 0.0;
    state.lambda_factors.resize(static_cast<size_t>(n));
    state.counts.assign(static_cast<size_t>(n), 0);
    for (int i = 0; i < n; ++i)
        state.lambda_factors[static_cast<size_t>(i)] = pop.agents[static_cast<size_t>(i)].lambda0;

    Rng rng(mix_seed(seed, kStreamHawkes));

    size_t next_grid = 0;
    auto snapshot_until = [&](double t_to) {
        // Snapshot every grid point in (state.t-segment, t_to] by decaying from
        // the segment start; pre-jump values when a jump lands on a grid point.
        while (next_grid < grid.size() && grid[next_grid] <= t_to) {
            const double dt = grid[next_grid] - state.t;
            for (int i = 0; i < n; ++i) {
                const auto& a = pop.agents[static_cast<size_t>(i)];
                path.factor_snapshots[next_grid * static_cast<size_t>(n) + static_cast<size_t>(i)] =
                    decay_factor(state.lambda_factors[static_cast<size_t>(i)], a.alpha, a.lambda_inf, dt);
            }
            ++next_grid;
        }
    };

    std::vector<double> rates(static_cast<size_t>(n));
    for (;;) {
        // Dominating rate for the segment ahead of state.t.
        double bound = 0.0;
        for (int i = 0; i < n; ++i) {
            const auto& a = pop.agents[static_cast<size_t>(i)];
            bound += fn.value(std::max(state.lambda_factors[static_cast<size_t>(i)], a.lambda_inf));
        }
        if (bound <= 0.0) break;  // f == 0: no more jumps possible

        const double dt = rng.exponential(bound);
        const double t_cand = state.t + dt;
        if (t_cand > T) break;

        snapshot_until(t_cand);

        for (int i = 0; i < n; ++i) {
            const auto& a = pop.agents[static_cast<size_t>(i)];
            auto& lam = state.lambda_factors[static_cast<size_t>(i)];
            lam = decay_factor(lam, a.alpha, a.lambda_inf, dt);
        }
        state.t = t_cand;

        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            rates[static_cast<size_t>(i)] = fn.value(state.lambda_factors[static_cast<size_t>(i)]);
            total += rates[static_cast<size_t>(i)];
        }
        if (rng.uniform01() * bound <= total) {
            double v = rng.uniform01() * total;
            int comp = n - 1;
            for (int i = 0; i < n; ++i) {
                v -= rates[static_cast<size_t>(i)];
                if (v <= 0.0) {
                    comp = i;
                    break;
                }
            }
            apply_jump(state, comp, pop);
            path.jumps.push_back({state.t, static_cast<uint32_t>(comp)});
        }
    }
    snapshot_until(T);
    return path;
}

double compensator_integral(const PopulationSpec& pop, const JumpRateFn& fn,
                            const HawkesPath& path, int component, double t) {
    const int n = pop.n;
    if (component < 0 || component >= n)
        throw std::out_of_range("compensator_integral: component out of range");
    const auto& a = pop.agents[static_cast<size_t>(component)];
    double lam = a.lambda0;
    double seg_start = 0.0;
    double acc = 0.0;
    // Composite 5-point Gauss-Legendre; long interjump segments are split so
    // the quadrature error stays near rounding level.
    constexpr double kMaxChunk = 0.25;
    auto add_segment = [&](double from, double to) {
        if (to <= from) return;
        const int chunks = std::max(1, static_cast<int>(std::ceil((to - from) / kMaxChunk)));
        for (int c = 0; c < chunks; ++c) {
            const double c0 = from + (to - from) * c / chunks;
            const double c1 = from + (to - from) * (c + 1) / chunks;
            acc += gauss_legendre_5(
                [&](double s) {
                    return fn.value(decay_factor(lam, a.alpha, a.lambda_inf, s - from));
                },
                c0, c1);
        }
    };
    for (const auto& j : path.jumps) {
        if (j.time >= t) break;
        add_segment(seg_start, j.time);
        lam = decay_factor(lam, a.alpha, a.lambda_inf, j.time - seg_start);
        lam += a.beta * pop.agents[j.component].varsigma / static_cast<double>(n);
        seg_start = j.time;
    }
    add_segment(seg_start, t);
    return acc;
}

namespace {

// Snapshots implied by a jump sequence: pre-jump values at grid points that
// coincide with a jump time, matching the simulator's convention.
std::vector<double> replay_snapshots(const PopulationSpec& pop, std::span<const double> grid,
                                     std::span<const JumpRecord> jumps) {
    const int n = pop.n;
    std::vector<double> snaps(grid.size() * static_cast<size_t>(n));
    std::vector<double> lam(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        lam[static_cast<size_t>(i)] = pop.agents[static_cast<size_t>(i)].lambda0;
    double seg_start = 0.0;
    size_t jump_idx = 0;
    for (size_t k = 0; k < grid.size(); ++k) {
        const double tg = grid[k];
        while (jump_idx < jumps.size() && jumps[jump_idx].time < tg) {
            const auto& j = jumps[jump_idx];
            for (int i = 0; i < n; ++i) {
                const auto& a = pop.agents[static_cast<size_t>(i)];
                lam[static_cast<size_t>(i)] = decay_factor(lam[static_cast<size_t>(i)], a.alpha,
                                                           a.lambda_inf, j.time - seg_start);
            }
            const double emit = pop.agents[j.component].varsigma / static_cast<double>(n);
            for (int i = 0; i < n; ++i)
                lam[static_cast<size_t>(i)] += pop.agents[static_cast<size_t>(i)].beta * emit;
            seg_start = j.time;
            ++jump_idx;
        }
        for (int i = 0; i < n; ++i) {
            const auto& a = pop.agents[static_cast<size_t>(i)];
            snaps[k * static_cast<size_t>(n) + static_cast<size_t>(i)] =
                decay_factor(lam[static_cast<size_t>(i)], a.alpha, a.lambda_inf, tg - seg_start);
        }
    }
    return snaps;
}

}  // namespace

double replay_snapshot_error(const PopulationSpec& pop, const HawkesPath& path) {
    const auto snaps = replay_snapshots(pop, path.grid, path.jumps);
    double err = 0.0;
    for (size_t i = 0; i < snaps.size(); ++i)
        err = std::max(err, std::fabs(snaps[i] - path.factor_snapshots[i]));
    return err;
}

HawkesPath build_path_from_jumps(const PopulationSpec& pop, std::span<const double> grid,
                                 std::vector<JumpRecord> jumps) {
    for (size_t i = 1; i < jumps.size(); ++i)
        if (jumps[i].time <= jumps[i - 1].time)
            throw std::invalid_argument("build_path_from_jumps: jump times must increase");
    HawkesPath path;
    path.n = pop.n;
    path.grid.assign(grid.begin(), grid.end());
    path.factor_snapshots = replay_snapshots(pop, grid, jumps);
    path.jumps = std::move(jumps);
    return path;
}

void write_hawkes_dump(std::ostream& os, const HawkesPath& path) {
    const char magic[4] = {'H', 'W', 'K', 'S'};
    const uint32_t version = 1;
    const uint32_t n = static_cast<uint32_t>(path.n);
    const uint32_t count = static_cast<uint32_t>(path.jumps.size());
    os.write(magic, 4);
    os.write(reinterpret_cast<const char*>(&version), 4);
    os.write(reinterpret_cast<const char*>(&n), 4);
    os.write(reinterpret_cast<const char*>(&count), 4);
    for (const auto& j : path.jumps) {
        os.write(reinterpret_cast<const char*>(&j.time), 8);
        os.write(reinterpret_cast<const char*>(&j.component), 4);
    }
}

HawkesDump read_hawkes_dump(std::istream& is) {
    char magic[4];
    HawkesDump dump;
    uint32_t count = 0;
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "HWKS", 4) != 0)
        throw std::runtime_error("read_hawkes_dump: bad magic");
    is.read(reinterpret_cast<char*>(&dump.version), 4);
    is.read(reinterpret_cast<char*>(&dump.n), 4);
    is.read(reinterpret_cast<char*>(&count), 4);
    if (!is) throw std::runtime_error("read_hawkes_dump: truncated header");
    dump.jumps.resize(count);
    for (auto& j : dump.jumps) {
        is.read(reinterpret_cast<char*>(&j.time), 8);
        is.read(reinterpret_cast<char*>(&j.component), 4);
    }
    if (!is) throw std::runtime_error("read_hawkes_dump: truncated records");
    return dump;
}

}  // namespace mfg
