#include "stabledmd/regression.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "stabledmd/stabilization.hpp"

namespace stabledmd {

Matrix pseudoinverse(const Matrix& A, double rank_tol) {
    if (A.size() > 0 && !A.allFinite()) throw FitError("pseudoinverse: non-finite input");
    if (A.rows() == 0 || A.cols() == 0) return Matrix::Zero(A.cols(), A.rows());

    Eigen::BDCSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) throw FitError("pseudoinverse: SVD failed");
    const Vector& sv = svd.singularValues();
    const double cutoff = rank_tol * (sv.size() > 0 ? sv(0) : 0.0);
    Vector inv = Vector::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff && sv(i) > 0.0) inv(i) = 1.0 / sv(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

namespace {

void check_system(const SnapshotSystem& sys) {
    if (sys.pair_count < 1) throw std::invalid_argument("fit: empty snapshot system");
    if (sys.X0.cols() != sys.pair_count || sys.X1.cols() != sys.pair_count ||
        sys.U0.cols() != sys.pair_count)
        throw std::invalid_argument("fit: snapshot column counts disagree");
    if (sys.X1.rows() != sys.X0.rows())
        throw std::invalid_argument("fit: X0/X1 state dimensions disagree");
    if (!sys.X0.allFinite() || !sys.X1.allFinite() || (sys.U0.size() > 0 && !sys.U0.allFinite()))
        throw FitError("fit: non-finite entries in the snapshot system");
}

ControlledLinearModel make_model(const SnapshotSystem& sys, const Matrix& Mt, double lambda) {
    const int D = sys.state_dim();
    ControlledLinearModel model;
    model.M = Mt.leftCols(D);
    model.N = Mt.rightCols(Mt.cols() - D);
    model.lambda = lambda;
    model.spectral_radius_M = spectral_radius(model.M);
    model.feature_spec = sys.feature_spec;
    model.dt = sys.dt;
    model.raw_control_dim = sys.raw_control_dim;
    model.fit_report.residual_frobenius = training_residual(sys, model);
    if (lambda == 0.0) model.fit_report.rho_at_lambda_zero = model.spectral_radius_M;
    return model;
}

// Penalized coordinates: the state block always, the control block on request.
Matrix solve_augmented(const SnapshotSystem& sys, double lambda, bool penalize_control) {
    const int D = sys.state_dim();
    const int dp = sys.feature_dim();
    const int n = sys.pair_count;
    const Matrix Y0 = sys.stacked_regressors();
    if (lambda == 0.0) return sys.X1 * pseudoinverse(Y0);

    const int aug = penalize_control ? D + dp : D;
    Matrix Ybar(D + dp, n + aug);
    Ybar.leftCols(n) = Y0;
    Ybar.rightCols(aug).setZero();
    Ybar.block(0, n, aug, aug) = lambda * Matrix::Identity(aug, aug);
    Matrix X1bar(D, n + aug);
    X1bar.leftCols(n) = sys.X1;
    X1bar.rightCols(aug).setZero();
    return X1bar * pseudoinverse(Ybar);
}

Matrix solve_per_row(const SnapshotSystem& sys, double lambda, bool penalize_control) {
    const int D = sys.state_dim();
    const int dp = sys.feature_dim();
    const Matrix Y0 = sys.stacked_regressors();

    Matrix A = Y0 * Y0.transpose();
    const double penalty = lambda * lambda;
    for (int i = 0; i < D; ++i) A(i, i) += penalty;
    if (penalize_control)
        for (int i = D; i < D + dp; ++i) A(i, i) += penalty;

    const Matrix rhs = Y0 * sys.X1.transpose();  // (D+dp) x D, one column per output row
    Eigen::LDLT<Matrix> ldlt(A);
    Matrix W;
    bool ok = ldlt.info() == Eigen::Success;
    if (ok) {
        W = ldlt.solve(rhs);
        const double scale = std::max(1.0, rhs.norm());
        ok = W.allFinite() && (A * W - rhs).norm() <= 1e-8 * scale;
    }
    if (!ok) W = pseudoinverse(A) * rhs;  // rank-deficient normal equations
    return W.transpose();
}

}  // namespace

ControlledLinearModel fit_ols(const SnapshotSystem& sys) {
    check_system(sys);
    return make_model(sys, sys.X1 * pseudoinverse(sys.stacked_regressors()), 0.0);
}

ControlledLinearModel fit_ridge(const SnapshotSystem& sys, const RidgeConfig& cfg) {
    check_system(sys);
    if (cfg.lambda < 0.0) throw std::invalid_argument("fit_ridge: lambda must be >= 0");
    Matrix Mt;
    switch (cfg.solver) {
        case RidgeSolver::augmented_pseudoinverse:
            Mt = solve_augmented(sys, cfg.lambda, cfg.penalize_control_block);
            break;
        case RidgeSolver::per_row_ridge:
            Mt = solve_per_row(sys, cfg.lambda, cfg.penalize_control_block);
            break;
    }
    return make_model(sys, Mt, cfg.lambda);
}

double training_residual(const SnapshotSystem& sys, const ControlledLinearModel& model) {
    Matrix pred = model.M * sys.X0;
    if (model.N.cols() > 0) pred += model.N * sys.U0;
    return (sys.X1 - pred).norm();
}

}  // namespace stabledmd
