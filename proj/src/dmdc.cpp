#include "stabledmd/dmdc.hpp"

#include <Eigen/SVD>
#include <cmath>

namespace stabledmd {

SvdTruncation SvdTruncation::fixed(int k) {
    if (k < 1) throw std::invalid_argument("SvdTruncation: fixed rank must be >= 1");
    SvdTruncation t;
    t.rule = Rule::fixed_rank;
    t.rank = k;
    return t;
}

SvdTruncation SvdTruncation::energy(double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw std::invalid_argument("SvdTruncation: energy fraction must be in (0, 1]");
    SvdTruncation t;
    t.rule = Rule::energy;
    t.fraction = fraction;
    return t;
}

namespace {

constexpr double kRankTol = 1e-12;
constexpr double kDivergenceCap = 1e12;

void check_system(const SnapshotSystem& sys) {
    if (sys.pair_count < 1) throw std::invalid_argument("fit_dmdc: empty snapshot system");
    if (!sys.X0.allFinite() || !sys.X1.allFinite() || (sys.U0.size() > 0 && !sys.U0.allFinite()))
        throw FitError("fit_dmdc: non-finite entries in the snapshot system");
}

int truncation_rank(const Vector& sv, const SvdTruncation& trunc, int max_allowed) {
    int numerical = 0;
    const double cutoff = (sv.size() > 0 ? sv(0) : 0.0) * kRankTol;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff && sv(i) > 0.0) ++numerical;

    if (trunc.rule == SvdTruncation::Rule::fixed_rank) {
        if (trunc.rank > max_allowed)
            throw std::invalid_argument("SVD truncation rank " + std::to_string(trunc.rank) +
                                        " exceeds the smallest matrix dimension " +
                                        std::to_string(max_allowed));
        return std::min(trunc.rank, numerical);
    }
    const double total = sv.squaredNorm();
    if (total == 0.0) return 0;
    double acc = 0.0;
    int r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        acc += sv(i) * sv(i);
        ++r;
        if (acc >= trunc.fraction * total) break;
    }
    return std::min(r, numerical);
}

struct DmdcParts {
    Matrix X1bar;  // D x m augmented outputs
    Matrix M;      // D x D
    Matrix N;      // D x d'
    int r_tilde = 0;
};

DmdcParts dmdc_parts(const SnapshotSystem& sys, double lambda, const SvdTruncation& trunc) {
    check_system(sys);
    if (lambda < 0.0) throw std::invalid_argument("fit_dmdc: lambda must be >= 0");

    const int D = sys.state_dim();
    const int dp = sys.feature_dim();
    const int n = sys.pair_count;
    const int aug = lambda > 0.0 ? D : 0;

    Matrix Ybar(D + dp, n + aug);
    Ybar.leftCols(n) = sys.stacked_regressors();
    Matrix X1bar(D, n + aug);
    X1bar.leftCols(n) = sys.X1;
    if (aug > 0) {
        Ybar.rightCols(aug).setZero();
        Ybar.block(0, n, D, D) = lambda * Matrix::Identity(D, D);
        X1bar.rightCols(aug).setZero();
    }

    Eigen::BDCSVD<Matrix> svd(Ybar, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) throw FitError("fit_dmdc: SVD failed");
    const int max_rank = static_cast<int>(std::min(Ybar.rows(), Ybar.cols()));
    const int rt = truncation_rank(svd.singularValues(), trunc, max_rank);

    DmdcParts parts;
    parts.X1bar = std::move(X1bar);
    parts.r_tilde = rt;
    if (rt == 0) {
        parts.M = Matrix::Zero(D, D);
        parts.N = Matrix::Zero(D, dp);
        return parts;
    }
    const Vector inv_sigma = svd.singularValues().head(rt).cwiseInverse();
    const Matrix K = parts.X1bar * (svd.matrixV().leftCols(rt) * inv_sigma.asDiagonal());
    const Matrix Xi_t = svd.matrixU().leftCols(rt);  // (D+dp) x rt
    parts.M = K * Xi_t.topRows(D).transpose();
    parts.N = K * Xi_t.bottomRows(dp).transpose();
    return parts;
}

void divergence_check(const Vector& z, int step) {
    if (!z.allFinite() || z.cwiseAbs().maxCoeff() > kDivergenceCap)
        throw DivergenceError("rollout diverged at step " + std::to_string(step), step);
}

Matrix feature_columns(const FeatureSpec& spec, int feature_dim, int raw_control_dim,
                       const Matrix& controls, double dt, int steps) {
    if (feature_dim == 0 || steps == 0) return Matrix(feature_dim, 0);
    if (controls.rows() != raw_control_dim)
        throw std::invalid_argument("rollout: control dimension mismatch");
    if (controls.cols() < steps)
        throw std::invalid_argument("rollout: fewer control columns than steps");
    Matrix F = control_feature_matrix(controls, spec, dt);
    if (F.rows() != feature_dim)
        throw std::invalid_argument("rollout: feature spec does not match the model");
    return F;
}

}  // namespace

ControlledLinearModel fit_dmdc(const SnapshotSystem& sys, double lambda,
                               const SvdTruncation& trunc_input) {
    const DmdcParts parts = dmdc_parts(sys, lambda, trunc_input);
    ControlledLinearModel model;
    model.M = parts.M;
    model.N = parts.N;
    model.lambda = lambda;
    model.spectral_radius_M = spectral_radius(model.M);
    model.feature_spec = sys.feature_spec;
    model.dt = sys.dt;
    model.raw_control_dim = sys.raw_control_dim;
    model.fit_report.residual_frobenius = training_residual(sys, model);
    if (lambda == 0.0) model.fit_report.rho_at_lambda_zero = model.spectral_radius_M;
    return model;
}

ControlledLinearModel fit_dmdc_stable(const SnapshotSystem& sys, const SvdTruncation& trunc_input,
                                      const StabilizationConfig& stab_cfg) {
    ControlledLinearModel unpenalized = fit_dmdc(sys, 0.0, trunc_input);
    const double rho0 = unpenalized.spectral_radius_M;
    unpenalized.fit_report.rho_at_lambda_zero = rho0;
    if (rho0 <= stab_cfg.rho_desired) return unpenalized;

    const LambdaSearch search = find_stabilizing_lambda(
        [&](double lam) { return fit_dmdc(sys, lam, trunc_input).spectral_radius_M; }, stab_cfg);
    ControlledLinearModel model = fit_dmdc(sys, search.lambda_star, trunc_input);
    model.fit_report.rho_at_lambda_zero = rho0;
    model.fit_report.lambda_search_iterations = search.iterations + search.bracket_expansions;
    model.fit_report.stabilized = true;
    return model;
}

ReducedControlledModel reduce_model(const SnapshotSystem& sys, double lambda,
                                    const SvdTruncation& trunc_input,
                                    const SvdTruncation& trunc_output) {
    const DmdcParts parts = dmdc_parts(sys, lambda, trunc_input);

    Eigen::BDCSVD<Matrix> svd(parts.X1bar, Eigen::ComputeThinU);
    if (svd.info() != Eigen::Success) throw FitError("reduce_model: SVD of the output matrix failed");
    const Vector& sv = svd.singularValues();
    int rank = 0;
    const double cutoff = (sv.size() > 0 ? sv(0) : 0.0) * kRankTol;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff && sv(i) > 0.0) ++rank;

    int r = 0;
    if (trunc_output.rule == SvdTruncation::Rule::fixed_rank) {
        if (trunc_output.rank > rank)
            throw std::invalid_argument("reduce_model: requested basis size " +
                                        std::to_string(trunc_output.rank) +
                                        " exceeds the output-matrix rank " + std::to_string(rank));
        r = trunc_output.rank;
    } else {
        r = truncation_rank(sv, trunc_output, static_cast<int>(sv.size()));
    }
    if (r < 1) throw std::invalid_argument("reduce_model: empty reduced basis");

    ReducedControlledModel rom;
    rom.Xi = svd.matrixU().leftCols(r);
    rom.M_hat = rom.Xi.transpose() * parts.M * rom.Xi;
    rom.N_hat = rom.Xi.transpose() * parts.N;
    rom.r = r;
    rom.r_tilde = parts.r_tilde;
    rom.lambda = lambda;
    rom.feature_spec = sys.feature_spec;
    rom.dt = sys.dt;
    rom.raw_control_dim = sys.raw_control_dim;
    return rom;
}

Matrix rollout(const ControlledLinearModel& model, const Vector& z0, const Matrix& controls,
               int steps) {
    const int D = model.state_dim();
    const int dp = model.feature_dim();
    if (z0.size() != D) throw std::invalid_argument("rollout: initial state has wrong dimension");
    if (steps < 0) throw std::invalid_argument("rollout: steps must be >= 0");
    const Matrix F =
        feature_columns(model.feature_spec, dp, model.raw_control_dim, controls, model.dt, steps);

    const bool transformed = model.feature_spec.has_standardization();
    Vector z = z0;
    if (transformed)
        z = (z0 - model.feature_spec.state_shift).cwiseQuotient(model.feature_spec.state_scale);

    Matrix out(D, steps + 1);
    out.col(0) = z;
    for (int n = 0; n < steps; ++n) {
        z = model.M * z;
        if (dp > 0) z += model.N * F.col(n);
        divergence_check(z, n + 1);
        out.col(n + 1) = z;
    }
    if (transformed) {
        out.array().colwise() *= model.feature_spec.state_scale.array();
        out.colwise() += model.feature_spec.state_shift;
    }
    return out;
}

Matrix rollout_reduced(const ReducedControlledModel& model, const Vector& z0,
                       const Matrix& controls, int steps) {
    const int D = model.state_dim();
    const int dp = model.feature_dim();
    if (z0.size() != D)
        throw std::invalid_argument("rollout_reduced: initial state has wrong dimension");
    if (steps < 0) throw std::invalid_argument("rollout_reduced: steps must be >= 0");
    const Matrix F =
        feature_columns(model.feature_spec, dp, model.raw_control_dim, controls, model.dt, steps);

    const bool transformed = model.feature_spec.has_standardization();
    Vector z = z0;
    if (transformed)
        z = (z0 - model.feature_spec.state_shift).cwiseQuotient(model.feature_spec.state_scale);

    Vector zr = model.Xi.transpose() * z;
    Matrix out(D, steps + 1);
    out.col(0) = model.Xi * zr;
    for (int n = 0; n < steps; ++n) {
        zr = model.M_hat * zr;
        if (dp > 0) zr += model.N_hat * F.col(n);
        divergence_check(zr, n + 1);
        out.col(n + 1) = model.Xi * zr;
    }
    if (transformed) {
        out.array().colwise() *= model.feature_spec.state_scale.array();
        out.colwise() += model.feature_spec.state_shift;
    }
    return out;
}

}  // namespace stabledmd
