#include "stabledmd/stabilization.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace stabledmd {

double spectral_radius(const Matrix& M) {
    if (M.rows() != M.cols()) throw std::invalid_argument("spectral_radius: matrix is not square");
    if (M.size() == 0) return 0.0;
    if (!M.allFinite()) throw FitError("spectral_radius: non-finite entries");
    Eigen::EigenSolver<Matrix> es(M, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success) throw FitError("spectral_radius: eigendecomposition failed");
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

double stability_gap(const SnapshotSystem& sys, const RidgeConfig& cfg, double rho_desired) {
    return rho_desired - fit_ridge(sys, cfg).spectral_radius_M;
}

namespace {

void check_config(const StabilizationConfig& cfg) {
    if (!(cfg.rho_desired > 0.0 && cfg.rho_desired <= 1.0))
        throw std::invalid_argument("stabilization: rho_desired must be in (0, 1]");
    if (cfg.f_tol <= 0.0) throw std::invalid_argument("stabilization: f_tol must be positive");
    if (cfg.lambda_bracket_growth <= 1.0)
        throw std::invalid_argument("stabilization: bracket growth must exceed 1");
    if (cfg.max_iterations < 1)
        throw std::invalid_argument("stabilization: max_iterations must be >= 1");
}

}  // namespace

LambdaSearch find_stabilizing_lambda(const std::function<double(double)>& rho_of_lambda,
                                     const StabilizationConfig& cfg) {
    check_config(cfg);
    auto f = [&](double lam) { return cfg.rho_desired - rho_of_lambda(lam); };

    LambdaSearch out;
    double fa = f(0.0);
    ++out.evaluations;
    if (fa >= 0.0) {  // already within the target radius
        out.lambda_star = 0.0;
        out.gap = fa;
        return out;
    }

    double a = 0.0;
    double b = 1e-8;
    double fb = f(b);
    ++out.evaluations;
    while (fb <= 0.0) {
        if (++out.bracket_expansions > 60)
            throw SearchError("stabilizing-lambda search: bracket expansion failed after 60 steps");
        a = b;
        fa = fb;
        b *= cfg.lambda_bracket_growth;
        fb = f(b);
        ++out.evaluations;
    }
    if (fb <= cfg.f_tol) {
        out.lambda_star = b;
        out.gap = fb;
        return out;
    }

    // Convergence is declared on the f value, not the bracket width, so the
    // returned penalty always satisfies rho <= rho_desired. Regula falsi can
    // pin one endpoint and approach the root from the infeasible side; after
    // two consecutive updates of the same endpoint a midpoint step is taken.
    int same_side = 0;
    char last = 0;
    for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
        out.iterations = iter;
        double c;
        if (cfg.method == RootMethod::bisection || same_side >= 2)
            c = 0.5 * (a + b);
        else
            c = (a * fb - b * fa) / (fb - fa);
        if (!(c > a && c < b)) c = 0.5 * (a + b);

        const double fc = f(c);
        ++out.evaluations;
        if (fc >= 0.0 && fc <= cfg.f_tol) {
            out.lambda_star = c;
            out.gap = fc;
            return out;
        }
        if (fc < 0.0) {
            a = c;
            fa = fc;
            same_side = (last == 'a') ? same_side + 1 : 1;
            last = 'a';
        } else {
            b = c;
            fb = fc;
            same_side = (last == 'b') ? same_side + 1 : 1;
            last = 'b';
        }
    }
    throw SearchError("stabilizing-lambda search: no penalty in the accepted band after " +
                      std::to_string(cfg.max_iterations) + " iterations");
}

LambdaSearch find_stabilizing_lambda(const SnapshotSystem& sys, const RidgeConfig& base,
                                     const StabilizationConfig& cfg) {
    return find_stabilizing_lambda(
        [&](double lam) {
            RidgeConfig c = base;
            c.lambda = lam;
            return fit_ridge(sys, c).spectral_radius_M;
        },
        cfg);
}

ControlledLinearModel fit_stable(const SnapshotSystem& sys, const RidgeConfig& ridge_cfg,
                                 const StabilizationConfig& stab_cfg) {
    check_config(stab_cfg);
    RidgeConfig cfg = ridge_cfg;
    cfg.lambda = 0.0;
    ControlledLinearModel unpenalized = fit_ridge(sys, cfg);
    const double rho0 = unpenalized.spectral_radius_M;
    unpenalized.fit_report.rho_at_lambda_zero = rho0;
    if (rho0 <= stab_cfg.rho_desired) return unpenalized;

    const LambdaSearch search = find_stabilizing_lambda(sys, cfg, stab_cfg);
    cfg.lambda = search.lambda_star;
    ControlledLinearModel model = fit_ridge(sys, cfg);
    model.fit_report.rho_at_lambda_zero = rho0;
    model.fit_report.lambda_search_iterations = search.iterations + search.bracket_expansions;
    model.fit_report.stabilized = true;
    return model;
}

}  // namespace stabledmd
