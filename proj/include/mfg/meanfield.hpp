#pragma once

#include "mfg/model.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mfg {

/// Deterministic limiting intensity: lambda_l solves the mean-reversion ODE
/// with the self-excitation drift, lambda_f = f(lambda_l) pointwise.
struct IntensityPath {
    std::vector<double> grid;
    std::vector<double> lambda_l;
    std::vector<double> lambda_f;

    double dt() const { return grid.size() > 1 ? grid[1] - grid[0] : 0.0; }
};

/// RK4 with a uniform step on [0, T]; d lambda_l/dt = alpha (lambda_inf -
/// lambda_l) + beta varsigma f(lambda_l).
IntensityPath solve_intensity_ode(const MeanFieldParams& p, int steps);

/// The equilibrium function Phi(pi, lambda) =
///   (gamma-1)[sigma^2+(sigma0)^2] pi - theta gamma (sigma0)^2 pi
///   - lambda (1-pi)^{gamma-1} + lambda + b,
/// evaluated in expm1/log form so the lambda terms cancel stably.
double phi_big(double pi, double lambda, const AgentType& o);

/// Phi evaluated at pi = 1 - u with the distance u supplied directly. For
/// small lambda the root crowds the upper strategy bound, where u carries far
/// more resolution than pi itself; residual checks use this form.
double phi_big_dist(double u, double lambda, const AgentType& o);

/// d Phi / d pi; strictly negative on pi < 1.
double phi_big_dpi(double pi, double lambda, const AgentType& o);

struct PhiRoot {
    double value = 0.0;      // the root pi*
    double one_minus = 1.0;  // 1 - pi*, full precision near the upper bound
    bool interior = true;    // false: lambda = 0 closed form landed outside (0,1)
};

/// Unique zero of pi -> Phi(pi, lambda). For lambda > 0 this is a safeguarded
/// Newton/bisection search, parameterized by u = 1 - pi on [1e-15, 1]
/// (guaranteed bracket: Phi(0) = b > 0 and Phi -> -inf at 1). For lambda = 0
/// the linear closed form
/// b / ((1-gamma)[sigma^2+(sigma0)^2] + theta gamma (sigma0)^2) is returned,
/// which may lie outside (0,1); the flag marks that case.
PhiRoot solve_phi(double lambda, const AgentType& o, double tol = 1e-14);

/// Same solver with a warm-start guess for pi (used along continuous lambda
/// paths).
PhiRoot solve_phi_guess(double lambda, const AgentType& o, double tol, double guess);

/// eta(pi; lambda) = r + (b+lambda) pi - sigma^2 pi^2 / 2 + lambda log(1-pi).
double eta_fn(double pi, double lambda, const AgentType& o, double r);

/// The adjoint log-derivative rho(t) evaluated at (pi*, lambda_f(t)).
double rho_fn(double pi, double lambda, const AgentType& o, double r);

struct EquilibriumPath {
    std::vector<double> grid;
    std::vector<double> pi_star;
    std::vector<double> eta_star;
    std::vector<double> rho;
    std::vector<double> varphi;  // varphi[k] = exp(trapezoid integral of rho over [t_k, T])
};

/// Solves Phi(pi*_t, lambda_f(t)) = 0 on the grid (warm-started), then fills
/// eta, rho and varphi (varphi_T = 1 exactly).
EquilibriumPath mfe_path(const MeanFieldParams& p, const IntensityPath& ip, double tol = 1e-14);

struct MStarPath {
    std::vector<double> grid;
    std::vector<double> w0_increments;  // Delta W0 per step
    std::vector<double> m_star;         // m*_0 = x0
};

/// Geometric-mean wealth process of the limiting model along one common-noise
/// path: the ds-integral of eta - (sigma0 pi)^2/2 is composite trapezoid on
/// the grid, the dW0-integral is left-endpoint (Ito).
MStarPath sample_m_star(const MeanFieldParams& p, const EquilibriumPath& ep,
                        const IntensityPath& ip, uint64_t seed);

/// Same functional with externally supplied W0 increments (coupling hook for
/// the finite-population experiments).
std::vector<double> m_star_from_increments(const MeanFieldParams& p, const EquilibriumPath& ep,
                                           std::span<const double> w0_increments);

/// Implicit-function-theorem sensitivities of the equilibrium pi* = phi(...)
/// at fixed lambda: each entry is -(d Phi/d param)/(d Phi/d pi) at the solved
/// root. d_gamma uses the directly differentiated d Phi/d gamma
///   [sigma^2+(sigma0)^2] pi - theta (sigma0)^2 pi - lambda (1-pi)^{gamma-1} log(1-pi).
/// When lambda = 0 and the closed-form root lies outside (0,1), derivatives
/// come from the linear closed form and d_lambda is NaN (the jump term of Phi
/// is undefined at pi >= 1).
struct StaticsGradient {
    double d_b = 0.0;
    double d_sigma = 0.0;
    double d_sigma0 = 0.0;
    double d_gamma = 0.0;
    double d_theta = 0.0;
    double d_lambda = 0.0;
    double pi_star = 0.0;
    bool interior = true;
};

StaticsGradient statics_derivatives(double lambda, const AgentType& o);

/// Rebuilds the intensity ODE for each parameter value and reports
/// pi*_{t_eval}. Supported names: lambda0, alpha, lambda_inf, beta, varsigma,
/// b, sigma, sigma0, gamma, theta. Throws std::invalid_argument otherwise.
std::vector<std::pair<double, double>> sensitivity_sweep(const MeanFieldParams& p,
                                                         const std::string& param_name,
                                                         std::span<const double> values,
                                                         double t_eval, int steps);

}  // namespace mfg
