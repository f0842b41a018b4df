#include "mfg/model.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace mfg {

using nlohmann::json;

namespace {

void require(bool ok, const std::string& path, const std::string& what) {
    if (!ok) throw ConfigError(path + ": " + what);
}

}  // namespace

void AgentType::validate(const std::string& path) const {
    auto positive = [&](double v, const char* name) {
        require(std::isfinite(v) && v > 0.0, path + "." + name, "must be > 0");
    };
    positive(x0, "x0");
    positive(lambda0, "lambda0");
    positive(alpha, "alpha");
    positive(lambda_inf, "lambda_inf");
    positive(beta, "beta");
    positive(varsigma, "varsigma");
    positive(b, "b");
    positive(sigma, "sigma");
    positive(sigma0, "sigma0");
    require(std::isfinite(gamma) && gamma > 0.0 && gamma < 1.0, path + ".gamma",
            "must be in (0,1)");
    require(std::isfinite(theta) && theta >= 0.0 && theta <= 1.0, path + ".theta",
            "must be in [0,1]");
}

// ---- JumpRateFn -----------------------------------------------------------

JumpRateFn JumpRateFn::capped_linear(double M, double delta0) {
    if (!(M > 0.0) || !(delta0 > 0.0))
        throw ConfigError("market.M/market.delta0: must be > 0");
    JumpRateFn fn;
    fn.kind_ = JumpRateKind::CappedLinear;
    fn.M_ = M;
    fn.delta0_ = delta0;
    return fn;
}

JumpRateFn JumpRateFn::custom(std::vector<double> xs, std::vector<double> ys) {
    if (xs.empty() || xs.size() != ys.size())
        throw ConfigError("jump_rate.table: need equal-length nonempty knots");
    for (size_t i = 0; i < xs.size(); ++i) {
        if (!std::isfinite(xs[i]) || !std::isfinite(ys[i]) || ys[i] < 0.0)
            throw ConfigError("jump_rate.table: knots must be finite, values >= 0");
        if (i > 0 && (xs[i] <= xs[i - 1] || ys[i] < ys[i - 1]))
            throw ConfigError("jump_rate.table: x strictly increasing, y nondecreasing");
    }
    JumpRateFn fn;
    fn.kind_ = JumpRateKind::Custom;
    fn.xs_ = std::move(xs);
    fn.ys_ = std::move(ys);
    fn.M_ = fn.ys_.back();
    fn.delta0_ = 0.0;
    return fn;
}

double JumpRateFn::value(double x) const {
    if (x < 0.0) throw std::domain_error("eval_f: x must be >= 0");
    if (kind_ == JumpRateKind::Custom) {
        if (x <= xs_.front()) return ys_.front();
        if (x >= xs_.back()) return ys_.back();
        const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
        const size_t hi = static_cast<size_t>(it - xs_.begin());
        const size_t lo = hi - 1;
        const double w = (x - xs_[lo]) / (xs_[hi] - xs_[lo]);
        return ys_[lo] + w * (ys_[hi] - ys_[lo]);
    }
    if (x <= M_) return x;
    if (x >= M_ + delta0_) return M_ + delta0_;
    // Hermite bridge: f = M + delta0 * (-s^3 + s^2 + s), s in [0,1].
    const double s = (x - M_) / delta0_;
    return M_ + delta0_ * (((-s + 1.0) * s + 1.0) * s);
}

double JumpRateFn::slope(double x) const {
    if (x < 0.0) throw std::domain_error("eval_f_prime: x must be >= 0");
    if (kind_ == JumpRateKind::Custom) {
        if (x <= xs_.front() || x >= xs_.back()) return 0.0;
        const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
        const size_t hi = static_cast<size_t>(it - xs_.begin());
        const size_t lo = hi - 1;
        return (ys_[hi] - ys_[lo]) / (xs_[hi] - xs_[lo]);
    }
    if (x < M_) return 1.0;
    if (x > M_ + delta0_) return 0.0;
    const double s = (x - M_) / delta0_;
    return (-3.0 * s + 2.0) * s + 1.0;
}

double JumpRateFn::max_value() const {
    return kind_ == JumpRateKind::Custom ? ys_.back() : M_ + delta0_;
}

double eval_f(const JumpRateFn& fn, double x) { return fn.value(x); }
double eval_f_prime(const JumpRateFn& fn, double x) { return fn.slope(x); }

// ---- MeanFieldParams / PopulationSpec --------------------------------------

void MeanFieldParams::validate() const {
    o.validate("limiting_type");
    require(std::isfinite(r) && r >= 0.0, "market.r", "must be >= 0");
    require(std::isfinite(T) && T > 0.0, "market.T", "must be > 0");
    require(std::isfinite(eps0) && eps0 > 0.0 && eps0 < 1.0, "market.eps0",
            "must be in (0,1)");
}

PopulationSpec PopulationSpec::make(const AgentType& limit, int n, double perturbation) {
    require(n >= 1, "population.n", "must be >= 1");
    require(std::isfinite(perturbation) && perturbation >= 0.0, "population.perturbation",
            "must be >= 0");
    PopulationSpec pop;
    pop.n = n;
    pop.perturbation = perturbation;
    pop.limit = limit;
    pop.agents.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        AgentType a = limit;
        if (perturbation != 0.0) {
            const double c = (i % 2 == 0) ? 1.0 : -1.0;
            const double m = 1.0 + perturbation * c / static_cast<double>(n);
            a.x0 *= m;
            a.lambda0 *= m;
            a.alpha *= m;
            a.lambda_inf *= m;
            a.beta *= m;
            a.varsigma *= m;
            a.b *= m;
            a.sigma *= m;
            a.sigma0 *= m;
            a.gamma *= m;
            a.theta = std::min(a.theta * m, 1.0);
        }
        a.validate("population.agents[" + std::to_string(i) + "]");
        pop.agents[static_cast<size_t>(i)] = a;
    }
    return pop;
}

// ---- configuration ----------------------------------------------------------

namespace {

double get_num(const json& j, const std::string& section, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number()) throw ConfigError(section + "." + key + ": must be a number");
    return v.get<double>();
}

int64_t get_int(const json& j, const std::string& section, const char* key, int64_t fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number_integer()) throw ConfigError(section + "." + key + ": must be an integer");
    return v.get<int64_t>();
}

}  // namespace

Config load_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: parse error: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config: top level must be an object");

    Config cfg;
    const json empty = json::object();
    const json& market = doc.contains("market") ? doc.at("market") : empty;
    const json& lim = doc.contains("limiting_type") ? doc.at("limiting_type") : empty;
    const json& pop = doc.contains("population") ? doc.at("population") : empty;
    const json& run = doc.contains("run") ? doc.at("run") : empty;

    AgentType o;  // defaults = reference parameter set
    o.x0 = get_num(lim, "limiting_type", "x0", o.x0);
    o.lambda0 = get_num(lim, "limiting_type", "lambda0", o.lambda0);
    o.alpha = get_num(lim, "limiting_type", "alpha", o.alpha);
    o.lambda_inf = get_num(lim, "limiting_type", "lambda_inf", o.lambda_inf);
    o.beta = get_num(lim, "limiting_type", "beta", o.beta);
    o.varsigma = get_num(lim, "limiting_type", "varsigma", o.varsigma);
    o.b = get_num(lim, "limiting_type", "b", o.b);
    o.sigma = get_num(lim, "limiting_type", "sigma", o.sigma);
    o.sigma0 = get_num(lim, "limiting_type", "sigma0", o.sigma0);
    o.gamma = get_num(lim, "limiting_type", "gamma", o.gamma);
    o.theta = get_num(lim, "limiting_type", "theta", o.theta);

    cfg.params.o = o;
    cfg.params.r = get_num(market, "market", "r", 0.0);
    cfg.params.T = get_num(market, "market", "T", 10.0);
    cfg.params.eps0 = get_num(market, "market", "eps0", 1e-10);
    const double M = get_num(market, "market", "M", 100.0);
    const double delta0 = get_num(market, "market", "delta0", 0.01);
    cfg.params.f = JumpRateFn::capped_linear(M, delta0);
    cfg.params.validate();

    const int n = static_cast<int>(get_int(pop, "population", "n", 1));
    const double perturbation = get_num(pop, "population", "perturbation", 0.0);
    cfg.population = PopulationSpec::make(cfg.params.o, n, perturbation);

    cfg.run.time_steps = static_cast<int>(get_int(run, "run", "time_steps", 10000));
    require(cfg.run.time_steps >= 2, "run.time_steps", "must be >= 2");
    cfg.run.mc_paths = static_cast<int>(get_int(run, "run", "mc_paths", 1000));
    require(cfg.run.mc_paths >= 1, "run.mc_paths", "must be >= 1");
    const int64_t seed = get_int(run, "run", "seed", 42);
    cfg.run.seed = static_cast<uint64_t>(seed);
    if (run.contains("out_dir")) {
        if (!run.at("out_dir").is_string()) throw ConfigError("run.out_dir: must be a string");
        cfg.run.out_dir = run.at("out_dir").get<std::string>();
    }
    return cfg;
}

std::string serialize_config(const Config& cfg) {
    json doc;
    doc["market"] = {{"r", cfg.params.r},
                     {"T", cfg.params.T},
                     {"M", cfg.params.f.cap_threshold()},
                     {"delta0", cfg.params.f.smoothing_width()},
                     {"eps0", cfg.params.eps0}};
    const AgentType& o = cfg.params.o;
    doc["limiting_type"] = {{"x0", o.x0},       {"lambda0", o.lambda0},
                            {"alpha", o.alpha}, {"lambda_inf", o.lambda_inf},
                            {"beta", o.beta},   {"varsigma", o.varsigma},
                            {"b", o.b},         {"sigma", o.sigma},
                            {"sigma0", o.sigma0}, {"gamma", o.gamma},
                            {"theta", o.theta}};
    doc["population"] = {{"n", cfg.population.n}, {"perturbation", cfg.population.perturbation}};
    doc["run"] = {{"time_steps", cfg.run.time_steps},
                  {"mc_paths", cfg.run.mc_paths},
                  {"seed", cfg.run.seed},
                  {"out_dir", cfg.run.out_dir}};
    return doc.dump();
}

uint64_t config_digest(const Config& cfg) {
    const std::string s = serialize_config(cfg);
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string digest_hex(uint64_t digest) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(digest));
    return std::string(buf);
}

}  // namespace mfg
