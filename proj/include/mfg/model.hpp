#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfg {

/// Raised by configuration parsing/validation; the message carries the
/// offending field path (e.g. "limiting_type.gamma").
class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Per-agent parameter vector. Defaults are the reference parameter set used
/// throughout: gamma=0.4, theta=0.5, sigma=0.3, sigma0=0.2, b=0.2,
/// lambda0=0.1, lambda_inf=0.6, alpha=0.5, varsigma=0.2, beta=0.4.
struct AgentType {
    double x0 = 1.0;          // initial wealth, > 0
    double lambda0 = 0.1;     // initial intensity factor, > 0
    double alpha = 0.5;       // intensity mean-reversion speed, > 0
    double lambda_inf = 0.6;  // intensity mean-reversion level, > 0
    double beta = 0.4;        // receiving-side jump scale, > 0
    double varsigma = 0.2;    // emitted contagion weight, > 0
    double b = 0.2;           // excess return, > 0
    double sigma = 0.3;       // idiosyncratic volatility, > 0
    double sigma0 = 0.2;      // common volatility, > 0
    double gamma = 0.4;       // risk-aversion exponent, in (0,1)
    double theta = 0.5;       // competition weight, in [0,1]

    /// Throws ConfigError naming `path.<field>` on a violated range.
    void validate(const std::string& path = "agent") const;
};

enum class JumpRateKind { CappedLinear, Custom };

/// The jump rate function f: nonnegative, nondecreasing, bounded, C^1 in the
/// CappedLinear case. CappedLinear is the identity up to M, constant
/// M + delta0 beyond M + delta0, and a monotone cubic Hermite bridge in
/// between (value/slope M,1 at the left knot and M+delta0,0 at the right).
class JumpRateFn {
  public:
    static JumpRateFn capped_linear(double M, double delta0);

    /// Piecewise-linear table (clamped outside the knot range). The table
    /// must be nondecreasing with nonnegative values; used mainly to model
    /// constant or zero rates in tests and experiments.
    static JumpRateFn custom(std::vector<double> xs, std::vector<double> ys);

    double value(double x) const;
    double slope(double x) const;

    /// Supremum of f; a valid dominating rate for thinning.
    double max_value() const;

    JumpRateKind kind() const { return kind_; }
    double cap_threshold() const { return M_; }
    double smoothing_width() const { return delta0_; }

  private:
    JumpRateFn() = default;
    JumpRateKind kind_ = JumpRateKind::CappedLinear;
    double M_ = 100.0;
    double delta0_ = 0.01;
    std::vector<double> xs_, ys_;
};

double eval_f(const JumpRateFn& fn, double x);
double eval_f_prime(const JumpRateFn& fn, double x);

/// Parameters of the limiting (mean-field) model.
struct MeanFieldParams {
    AgentType o;                                   // constant limiting type
    double r = 0.0;                                // riskless rate, >= 0
    double T = 10.0;                               // horizon, > 0
    JumpRateFn f = JumpRateFn::capped_linear(100.0, 0.01);
    double eps0 = 1e-10;                           // strategy cap margin: pi <= 1 - eps0

    void validate() const;
};

/// Finite population. With perturbation = 0 all agents equal the limiting
/// type. Otherwise agent i gets the deterministic per-field jitter
/// o * (1 + perturbation * c_i / n) with alternating signs c_i, so the
/// empirical type measure converges to the limiting type at rate O(1/n) and
/// runs are reproducible.
struct PopulationSpec {
    int n = 1;
    double perturbation = 0.0;
    AgentType limit;
    std::vector<AgentType> agents;

    static PopulationSpec make(const AgentType& limit, int n, double perturbation);
    bool homogeneous() const { return perturbation == 0.0; }
};

struct RunConfig {
    int time_steps = 10000;
    int mc_paths = 1000;
    uint64_t seed = 42;
    std::string out_dir = "out";
};

struct Config {
    MeanFieldParams params;
    PopulationSpec population;
    RunConfig run;
};

/// Parses the JSON configuration document (sections `market`, `limiting_type`,
/// `population`, `run`); missing fields take the defaults above. Throws
/// ConfigError with the field path on parse or constraint violations.
Config load_config(const std::string& json_text);

/// Canonical JSON form; floating fields round-trip bit-for-bit through
/// load_config(serialize_config(cfg)).
std::string serialize_config(const Config& cfg);

/// FNV-1a 64-bit digest of the canonical serialized configuration.
uint64_t config_digest(const Config& cfg);

std::string digest_hex(uint64_t digest);

}  // namespace mfg
