#include "mfg/meanfield.hpp"

#include "mfg/numerics.hpp"
#include "mfg/rng.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mfg {

IntensityPath solve_intensity_ode(const MeanFieldParams& p, int steps) {
    if (steps < 2) throw std::invalid_argument("solve_intensity_ode: steps must be >= 2");
    const AgentType& o = p.o;
    const auto& f = p.f;
    auto rhs = [&](double lam) {
        return o.alpha * (o.lambda_inf - lam) + o.beta * o.varsigma * f.value(lam);
    };
    IntensityPath ip;
    ip.grid = make_grid(p.T, steps);
    ip.lambda_l.resize(ip.grid.size());
    ip.lambda_f.resize(ip.grid.size());
    const double h = p.T / static_cast<double>(steps);
    double lam = o.lambda0;
    ip.lambda_l[0] = lam;
    for (int k = 0; k < steps; ++k) {
        const double k1 = rhs(lam);
        const double k2 = rhs(lam + 0.5 * h * k1);
        const double k3 = rhs(lam + 0.5 * h * k2);
        const double k4 = rhs(lam + h * k3);
        lam += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        ip.lambda_l[static_cast<size_t>(k) + 1] = lam;
    }
    for (size_t k = 0; k < ip.grid.size(); ++k) ip.lambda_f[k] = f.value(ip.lambda_l[k]);
    return ip;
}

double phi_big_dist(double u, double lambda, const AgentType& o) {
    if (u <= 0.0) throw std::domain_error("phi_big: pi must be < 1");
    const double vol2 = o.sigma * o.sigma + o.sigma0 * o.sigma0;
    const double a = (o.gamma - 1.0) * vol2 - o.theta * o.gamma * o.sigma0 * o.sigma0;
    // -lambda[(1-pi)^{gamma-1} - 1] as -lambda*expm1((gamma-1)log(u)): exact at
    // pi=0 and free of cancellation for lambda >> |Phi|.
    return a * (1.0 - u) - lambda * std::expm1((o.gamma - 1.0) * std::log(u)) + o.b;
}

double phi_big(double pi, double lambda, const AgentType& o) {
    // 1 - pi is exact for pi in [0.5, 1] (Sterbenz) and for any representable
    // pi <= 0.5 the subtraction is harmless, so this loses nothing.
    return phi_big_dist(1.0 - pi, lambda, o);
}

double phi_big_dpi(double pi, double lambda, const AgentType& o) {
    const double vol2 = o.sigma * o.sigma + o.sigma0 * o.sigma0;
    return (o.gamma - 1.0) * vol2 - o.theta * o.gamma * o.sigma0 * o.sigma0 +
           (o.gamma - 1.0) * lambda * std::pow(1.0 - pi, o.gamma - 2.0);
}

namespace {

double closed_form_lambda0_root(const AgentType& o) {
    const double denom = (1.0 - o.gamma) * (o.sigma * o.sigma + o.sigma0 * o.sigma0) +
                         o.theta * o.gamma * o.sigma0 * o.sigma0;
    return o.b / denom;
}

}  // namespace

PhiRoot solve_phi_guess(double lambda, const AgentType& o, double tol, double guess) {
    if (!(tol > 0.0)) throw std::invalid_argument("solve_phi: tol must be > 0");
    if (lambda < 0.0) throw std::domain_error("solve_phi: lambda must be >= 0");
    if (lambda == 0.0) {
        const double root = closed_form_lambda0_root(o);
        return {root, 1.0 - root, root > 0.0 && root < 1.0};
    }
    // Work in u = 1 - pi. F(u) = Phi(1-u, lambda) is strictly increasing with
    // F(1) = b > 0 and F -> -inf as u -> 0+; the admissible bracket mirrors
    // the strategy cap pi <= 1 - 1e-15.
    auto F = [&](double u) { return phi_big_dist(u, lambda, o); };
    const double vol2 = o.sigma * o.sigma + o.sigma0 * o.sigma0;
    const double a = (o.gamma - 1.0) * vol2 - o.theta * o.gamma * o.sigma0 * o.sigma0;
    auto dF = [&](double u) { return -a + lambda * (1.0 - o.gamma) * std::pow(u, o.gamma - 2.0); };

    double lo = 1e-15;  // F(lo) < 0 in all but astronomically small lambda
    double hi = 1.0;    // F(hi) = b > 0
    if (F(lo) >= 0.0) return {1.0 - lo, lo, true};  // root beyond the strategy cap

    double u = 1.0 - guess;
    if (!(u > lo && u < hi)) u = 0.5;
    double fu = F(u);
    double best_u = u, best_f = std::fabs(fu);
    constexpr double eps = std::numeric_limits<double>::epsilon();
    for (int it = 0; it < 200; ++it) {
        if (std::fabs(fu) < best_f) {
            best_u = u;
            best_f = std::fabs(fu);
        }
        if (fu < 0.0)
            lo = u;
        else if (fu > 0.0)
            hi = u;
        else
            return {1.0 - u, u, true};
        double next = u - fu / dF(u);
        if (!(next > lo && next < hi))
            next = (hi / lo > 4.0) ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
        const double step = std::fabs(next - u);
        u = next;
        fu = F(u);
        if (std::fabs(fu) <= tol && step <= 4.0 * eps * u) return {1.0 - u, u, true};
        if (hi - lo <= 2.0 * eps * hi) {
            // the bracket cannot shrink further in double precision
            if (std::fabs(fu) < best_f) {
                best_u = u;
                best_f = std::fabs(fu);
            }
            return {1.0 - best_u, best_u, true};
        }
    }
    if (std::fabs(fu) <= tol) return {1.0 - u, u, true};
    throw std::runtime_error("solve_phi: no convergence in 200 iterations");
}

PhiRoot solve_phi(double lambda, const AgentType& o, double tol) {
    return solve_phi_guess(lambda, o, tol, 0.5);
}

double eta_fn(double pi, double lambda, const AgentType& o, double r) {
    // lambda == 0 must not touch log1p(-pi): the no-jump closed-form root can
    // exceed 1 (flagged non-interior), where the log is undefined.
    const double jump_term = lambda == 0.0 ? 0.0 : lambda * std::log1p(-pi);
    return r + (o.b + lambda) * pi - 0.5 * o.sigma * o.sigma * pi * pi + jump_term;
}

double rho_fn(double pi, double lambda, const AgentType& o, double r) {
    const double vol2 = o.sigma * o.sigma + o.sigma0 * o.sigma0;
    const double s02 = o.sigma0 * o.sigma0;
    const double tg = o.theta * o.gamma;
    const double pi2 = pi * pi;
    const double jump_term =
        lambda == 0.0 ? 0.0 : std::expm1((o.gamma - 1.0) * std::log1p(-pi)) * lambda;
    return -o.gamma * r - (o.gamma - 1.0) * (o.b + lambda) * pi +
           tg * eta_fn(pi, lambda, o, r) + tg * (o.gamma - 1.0) * s02 * pi2 -
           0.5 * (o.gamma - 1.0) * (o.gamma - 2.0) * vol2 * pi2 -
           0.5 * tg * (tg + 1.0) * s02 * pi2 - jump_term;
}

EquilibriumPath mfe_path(const MeanFieldParams& p, const IntensityPath& ip, double tol) {
    const size_t m = ip.grid.size();
    if (m < 2) throw std::invalid_argument("mfe_path: intensity path too short");
    EquilibriumPath ep;
    ep.grid = ip.grid;
    ep.pi_star.resize(m);
    ep.eta_star.resize(m);
    ep.rho.resize(m);
    ep.varphi.resize(m);
    double guess = 0.5;
    for (size_t k = 0; k < m; ++k) {
        const double lam = ip.lambda_f[k];
        const PhiRoot root = solve_phi_guess(lam, p.o, tol, guess);
        ep.pi_star[k] = root.value;
        if (root.interior) guess = root.value;
        ep.eta_star[k] = eta_fn(root.value, lam, p.o, p.r);
        ep.rho[k] = rho_fn(root.value, lam, p.o, p.r);
    }
    // varphi_t = exp(trapezoid of rho over [t, T]); terminal value exactly 1.
    ep.varphi[m - 1] = 1.0;
    double acc = 0.0;
    for (size_t k = m - 1; k-- > 0;) {
        const double dt = ep.grid[k + 1] - ep.grid[k];
        acc += 0.5 * dt * (ep.rho[k] + ep.rho[k + 1]);
        ep.varphi[k] = std::exp(acc);
    }
    return ep;
}

std::vector<double> m_star_from_increments(const MeanFieldParams& p, const EquilibriumPath& ep,
                                           std::span<const double> w0_increments) {
    const size_t m = ep.grid.size();
    if (w0_increments.size() + 1 != m)
        throw std::invalid_argument("m_star_from_increments: increment count mismatch");
    std::vector<double> out(m);
    out[0] = p.o.x0;
    double log_m = std::log(p.o.x0);
    for (size_t k = 0; k + 1 < m; ++k) {
        const double dt = ep.grid[k + 1] - ep.grid[k];
        const double g0 = ep.eta_star[k] - 0.5 * p.o.sigma0 * p.o.sigma0 * ep.pi_star[k] * ep.pi_star[k];
        const double g1 = ep.eta_star[k + 1] -
                          0.5 * p.o.sigma0 * p.o.sigma0 * ep.pi_star[k + 1] * ep.pi_star[k + 1];
        log_m += 0.5 * dt * (g0 + g1) + p.o.sigma0 * ep.pi_star[k] * w0_increments[k];
        out[k + 1] = std::exp(log_m);
    }
    return out;
}

MStarPath sample_m_star(const MeanFieldParams& p, const EquilibriumPath& ep,
                        const IntensityPath& ip, uint64_t seed) {
    if (ep.grid.size() != ip.grid.size())
        throw std::invalid_argument("sample_m_star: paths must share one grid");
    MStarPath mp;
    mp.grid = ep.grid;
    const size_t steps = ep.grid.size() - 1;
    mp.w0_increments.resize(steps);
    Rng rng(mix_seed(seed, kStreamCommon));
    for (size_t k = 0; k < steps; ++k) {
        const double dt = ep.grid[k + 1] - ep.grid[k];
        mp.w0_increments[k] = rng.normal() * std::sqrt(dt);
    }
    mp.m_star = m_star_from_increments(p, ep, mp.w0_increments);
    return mp;
}

StaticsGradient statics_derivatives(double lambda, const AgentType& o) {
    if (lambda < 0.0) throw std::domain_error("statics_derivatives: lambda must be >= 0");
    StaticsGradient g;
    const double s2 = o.sigma * o.sigma;
    const double s02 = o.sigma0 * o.sigma0;
    const PhiRoot root = solve_phi(lambda, o);
    g.pi_star = root.value;
    g.interior = root.interior;
    if (!root.interior) {
        // Linear closed form b / D at lambda = 0 with a root outside (0,1).
        const double D = (1.0 - o.gamma) * (s2 + s02) + o.theta * o.gamma * s02;
        const double pi = root.value;
        g.d_b = 1.0 / D;
        g.d_sigma = -pi * 2.0 * (1.0 - o.gamma) * o.sigma / D;
        g.d_sigma0 = -pi * (2.0 * (1.0 - o.gamma) * o.sigma0 + 2.0 * o.theta * o.gamma * o.sigma0) / D;
        g.d_gamma = -pi * (-(s2 + s02) + o.theta * s02) / D;
        g.d_theta = -pi * o.gamma * s02 / D;
        g.d_lambda = std::numeric_limits<double>::quiet_NaN();
        return g;
    }
    const double pi = root.value;
    const double dpi = phi_big_dpi(pi, lambda, o);
    const double log1mp = std::log1p(-pi);
    const double pow_g1 = std::pow(1.0 - pi, o.gamma - 1.0);
    const double d_b = 1.0;
    const double d_sigma = 2.0 * (o.gamma - 1.0) * o.sigma * pi;
    const double d_sigma0 = 2.0 * (o.gamma - 1.0) * o.sigma0 * pi - 2.0 * o.theta * o.gamma * o.sigma0 * pi;
    const double d_gamma = (s2 + s02) * pi - o.theta * s02 * pi - lambda * pow_g1 * log1mp;
    const double d_theta = -o.gamma * s02 * pi;
    const double d_lambda = -std::expm1((o.gamma - 1.0) * log1mp);
    g.d_b = -d_b / dpi;
    g.d_sigma = -d_sigma / dpi;
    g.d_sigma0 = -d_sigma0 / dpi;
    g.d_gamma = -d_gamma / dpi;
    g.d_theta = -d_theta / dpi;
    g.d_lambda = -d_lambda / dpi;
    return g;
}

std::vector<std::pair<double, double>> sensitivity_sweep(const MeanFieldParams& p,
                                                         const std::string& param_name,
                                                         std::span<const double> values,
                                                         double t_eval, int steps) {
    if (t_eval < 0.0 || t_eval > p.T)
        throw std::invalid_argument("sensitivity_sweep: t_eval outside [0,T]");
    double AgentType::* field = nullptr;
    if (param_name == "lambda0") field = &AgentType::lambda0;
    else if (param_name == "alpha") field = &AgentType::alpha;
    else if (param_name == "lambda_inf") field = &AgentType::lambda_inf;
    else if (param_name == "beta") field = &AgentType::beta;
    else if (param_name == "varsigma") field = &AgentType::varsigma;
    else if (param_name == "b") field = &AgentType::b;
    else if (param_name == "sigma") field = &AgentType::sigma;
    else if (param_name == "sigma0") field = &AgentType::sigma0;
    else if (param_name == "gamma") field = &AgentType::gamma;
    else if (param_name == "theta") field = &AgentType::theta;
    else throw std::invalid_argument("sensitivity_sweep: unknown parameter " + param_name);

    std::vector<std::pair<double, double>> table;
    table.reserve(values.size());
    for (double v : values) {
        MeanFieldParams q = p;
        q.o.*field = v;
        q.o.validate("sweep." + param_name);
        const IntensityPath ip = solve_intensity_ode(q, steps);
        const double dt = q.T / static_cast<double>(steps);
        const size_t k = static_cast<size_t>(std::llround(t_eval / dt));
        const PhiRoot root = solve_phi(ip.lambda_f[std::min(k, ip.grid.size() - 1)], q.o);
        table.emplace_back(v, root.value);
    }
    return table;
}

}  // namespace mfg
