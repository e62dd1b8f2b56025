#pragma once

#include <functional>

#include "stabledmd/regression.hpp"

namespace stabledmd {

enum class RootMethod { bisection, regula_falsi };

struct StabilizationConfig {
    double rho_desired = 0.999;          // target spectral radius, in (0, 1]
    double f_tol = 1e-4;                 // accepted band: rho in [rho_desired - f_tol, rho_desired]
    double lambda_bracket_growth = 10.0;
    int max_iterations = 200;
    RootMethod method = RootMethod::bisection;
};

/// Maximum eigenvalue modulus via a full eigendecomposition.
double spectral_radius(const Matrix& M);

/// f(lambda) = rho_desired - rho(M(lambda)) with M(lambda) the state block of
/// the ridge fit at cfg.lambda.
double stability_gap(const SnapshotSystem& sys, const RidgeConfig& cfg, double rho_desired);

struct LambdaSearch {
    double lambda_star = 0.0;
    double gap = 0.0;  // f(lambda_star), in [0, f_tol] on convergence
    int iterations = 0;
    int bracket_expansions = 0;
    int evaluations = 0;
};

/// Root search on f(lambda) = rho_desired - rho_of_lambda(lambda).
/// If f(0) >= 0 the model is already stable and lambda_star = 0 is returned
/// without iterating. Otherwise the bracket is grown from 1e-8 by the
/// configured factor until f > 0, then narrowed by bisection or regula falsi
/// until 0 <= f(lambda) <= f_tol, so the returned penalty always satisfies
/// rho <= rho_desired.
LambdaSearch find_stabilizing_lambda(const std::function<double(double)>& rho_of_lambda,
                                     const StabilizationConfig& cfg);

LambdaSearch find_stabilizing_lambda(const SnapshotSystem& sys, const RidgeConfig& base,
                                     const StabilizationConfig& cfg);

/// Fit at lambda = 0; if the spectral radius already satisfies the target,
/// return that model, otherwise search for a stabilizing penalty and refit.
ControlledLinearModel fit_stable(const SnapshotSystem& sys, const RidgeConfig& ridge_cfg,
                                 const StabilizationConfig& stab_cfg);

}  // namespace stabledmd
