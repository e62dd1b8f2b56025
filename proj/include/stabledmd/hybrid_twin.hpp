#pragma once

#include <string>

#include "stabledmd/dmdc.hpp"

namespace stabledmd {

/// Residual trajectories C_n = Z_n^measured - Z_n^coarse with the original
/// controls; flight ids and timing are preserved.
struct ResidualDataset {
    TrajectoryDataset data;
};

/// A coarse-trajectory source plus a stabilized linear model of the residual
/// dynamics C_{n+1} = W C_n + V u'_n (W = correction.M, V = correction.N).
struct HybridTwinModel {
    ControlledLinearModel correction;
    std::string coarse_source;  // name of the coarse trajectory file/set
    FeatureSpec feature_spec;
};

ResidualDataset compute_residuals(const TrajectoryDataset& measured,
                                  const TrajectoryDataset& coarse);

/// Fits the correction on measured-minus-coarse residuals via fit_stable, so
/// the returned model satisfies the spectral-radius target.
HybridTwinModel fit_hybrid_twin(const TrajectoryDataset& measured, const TrajectoryDataset& coarse,
                                const FeatureSpec& spec, const RidgeConfig& ridge_cfg,
                                const StabilizationConfig& stab_cfg);

/// Z_n^HT = Z_n^coarse + C_n with the correction rolled out from
/// C_0 = z0_measured - Z_0^coarse. Only the initial measurement enters;
/// steps = -1 means the full coarse horizon.
Matrix predict_hybrid(const HybridTwinModel& ht, const Flight& coarse_traj,
                      const Vector& z0_measured, const Matrix& controls, int steps = -1);

}  // namespace stabledmd
