#pragma once

#include "mfg/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace mfg {

struct HawkesState {
    double t = 0.0;
    std::vector<double> lambda_factors;  // one per component, > 0
    std::vector<uint32_t> counts;
};

struct JumpRecord {
    double time;
    uint32_t component;
};

/// One realization of the n-dimensional mutually exciting system: the exact
/// jump sequence plus intensity-factor snapshots on the shared time grid
/// (row-major, snapshot index k * n + i).
struct HawkesPath {
    int n = 0;
    std::vector<double> grid;
    std::vector<JumpRecord> jumps;
    std::vector<double> factor_snapshots;

    double factor_at(size_t grid_k, int component) const {
        return factor_snapshots[grid_k * static_cast<size_t>(n) + static_cast<size_t>(component)];
    }
};

/// Exact interjump flow: lambda_inf + (lambda - lambda_inf) e^{-alpha dt}.
double decay_factor(double lambda, double alpha, double lambda_inf, double dt);

/// Jump of component j: every factor i gains beta_i * varsigma_j / n and
/// counts[j] increments. Throws std::out_of_range on a bad index.
void apply_jump(HawkesState& state, int j, const PopulationSpec& pop);

/// Ogata thinning, exact in law. The dominating rate is refreshed at every
/// candidate as sum_i f(max(lambda_i, lambda_inf_i)), an upper bound for the
/// whole interjump segment because each factor moves monotonically toward its
/// reversion level between jumps and f is nondecreasing. A single candidate
/// stream drives all components, so simultaneous jumps cannot occur.
HawkesPath simulate_hawkes(const PopulationSpec& pop, const JumpRateFn& fn, double T,
                           std::span<const double> grid, uint64_t seed);

/// Compensator integral int_0^t f(lambda_s^component) ds, 5-point
/// Gauss-Legendre per interjump segment (f of the decay flow is smooth there).
double compensator_integral(const PopulationSpec& pop, const JumpRateFn& fn,
                            const HawkesPath& path, int component, double t);

/// Replays the jump record through the decay/jump dynamics and returns the
/// max abs deviation from the stored snapshots (consistency diagnostic).
double replay_snapshot_error(const PopulationSpec& pop, const HawkesPath& path);

/// Builds a path (with consistent factor snapshots) from a given jump
/// sequence; used to inject or remove jumps in structural tests.
HawkesPath build_path_from_jumps(const PopulationSpec& pop, std::span<const double> grid,
                                 std::vector<JumpRecord> jumps);

/// Binary jump dump: 16-byte header (magic "HWKS", u32 version, u32 n,
/// u32 count) followed by little-endian records (f64 time, u32 component).
void write_hawkes_dump(std::ostream& os, const HawkesPath& path);

struct HawkesDump {
    uint32_t version = 0;
    uint32_t n = 0;
    std::vector<JumpRecord> jumps;
};

HawkesDump read_hawkes_dump(std::istream& is);

}  // namespace mfg
