#pragma once

#include "stabledmd/stabilization.hpp"

namespace stabledmd {

/// Rank selection for a truncated SVD: either an explicit rank or the
/// smallest rank capturing the given fraction of squared singular values.
/// Either way, directions below 1e-12 * sigma_max are always dropped.
struct SvdTruncation {
    enum class Rule { fixed_rank, energy };
    Rule rule = Rule::energy;
    int rank = 0;
    double fraction = 1.0 - 1e-10;

    static SvdTruncation fixed(int k);
    static SvdTruncation energy(double fraction);
};

/// Operator extraction through the truncated SVD of the (ridge-augmented)
/// regressor block. At full rank and lambda = 0 this coincides with fit_ols.
ControlledLinearModel fit_dmdc(const SnapshotSystem& sys, double lambda,
                               const SvdTruncation& trunc_input = {});

/// Stabilized variant: the penalty search runs with fit_dmdc as the fit
/// function; the radius is measured on the full-order M.
ControlledLinearModel fit_dmdc_stable(const SnapshotSystem& sys, const SvdTruncation& trunc_input,
                                      const StabilizationConfig& stab_cfg);

/// Projects the operators onto the leading left singular subspace of the
/// augmented output matrix. trunc_output selects r; the raw state block is
/// reduced while control features stay full-dimensional.
ReducedControlledModel reduce_model(const SnapshotSystem& sys, double lambda,
                                    const SvdTruncation& trunc_input,
                                    const SvdTruncation& trunc_output);

/// Recursive prediction Z_{n+1} = M Z_n + N u'_n from Z_0 only (no
/// measurement feedback). controls holds raw control vectors, one column per
/// step, from which features are rebuilt; at least `steps` columns are
/// required. Returns D x (steps+1) including the initial state. Throws
/// DivergenceError when a state entry exceeds 1e12 in magnitude.
Matrix rollout(const ControlledLinearModel& model, const Vector& z0, const Matrix& controls,
               int steps);

/// Same recursion carried in r-dimensional coordinates and lifted by Xi.
Matrix rollout_reduced(const ReducedControlledModel& model, const Vector& z0,
                       const Matrix& controls, int steps);

}  // namespace stabledmd
