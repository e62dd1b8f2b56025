#pragma once

#include "stabledmd/types.hpp"

namespace stabledmd {

enum class RidgeSolver {
    augmented_pseudoinverse,  // one SVD of the augmented regressor block
    per_row_ridge,            // shared normal-equation factorization, one solve per output row
};

/// Ridge fit configuration. By default only the state block M is penalized;
/// the augmented columns for the control block are zero, so N is free.
struct RidgeConfig {
    double lambda = 0.0;
    RidgeSolver solver = RidgeSolver::augmented_pseudoinverse;
    bool penalize_control_block = false;
};

/// SVD-based Moore-Penrose pseudoinverse. Singular values below
/// rank_tol * sigma_max are treated as zero.
Matrix pseudoinverse(const Matrix& A, double rank_tol = 1e-12);

/// Minimum-norm least-squares fit of X1 ~ [M N] [X0; U0].
ControlledLinearModel fit_ols(const SnapshotSystem& sys);

/// Penalized fit minimizing ||X1 - [M N][X0;U0]||_F^2 + lambda^2 ||M||_F^2
/// (plus ||N||_F^2 when penalize_control_block). With lambda = 0 this
/// reproduces fit_ols.
ControlledLinearModel fit_ridge(const SnapshotSystem& sys, const RidgeConfig& cfg);

/// Unpenalized training residual ||X1 - M X0 - N U0||_F.
double training_residual(const SnapshotSystem& sys, const ControlledLinearModel& model);

}  // namespace stabledmd
