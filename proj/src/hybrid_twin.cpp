#include "stabledmd/hybrid_twin.hpp"

#include "stabledmd/errors.hpp"

namespace stabledmd {

ResidualDataset compute_residuals(const TrajectoryDataset& measured,
                                  const TrajectoryDataset& coarse) {
    if (measured.state_dim != coarse.state_dim)
        throw AlignmentError("compute_residuals: state dimensions differ");
    if (measured.dt != coarse.dt) throw AlignmentError("compute_residuals: time steps differ");

    ResidualDataset residuals;
    residuals.data.state_dim = measured.state_dim;
    residuals.data.control_dim = measured.control_dim;
    residuals.data.dt = measured.dt;
    for (const Flight& m : measured.flights) {
        if (!coarse.has_flight(m.id))
            throw AlignmentError("compute_residuals: flight '" + m.id +
                                 "' has no coarse counterpart");
        const Flight& c = coarse.flight(m.id);
        if (c.states.cols() != m.states.cols())
            throw AlignmentError("compute_residuals: flight '" + m.id +
                                 "' has mismatched snapshot counts");
        Flight r;
        r.id = m.id;
        r.states = m.states - c.states;
        r.controls = m.controls;
        r.t0 = m.t0;
        residuals.data.flights.push_back(std::move(r));
    }
    return residuals;
}

HybridTwinModel fit_hybrid_twin(const TrajectoryDataset& measured, const TrajectoryDataset& coarse,
                                const FeatureSpec& spec, const RidgeConfig& ridge_cfg,
                                const StabilizationConfig& stab_cfg) {
    const ResidualDataset residuals = compute_residuals(measured, coarse);
    const SnapshotSystem sys = assemble_snapshots(residuals.data, {}, spec);
    HybridTwinModel ht;
    ht.correction = fit_stable(sys, ridge_cfg, stab_cfg);
    ht.feature_spec = ht.correction.feature_spec;
    return ht;
}

Matrix predict_hybrid(const HybridTwinModel& ht, const Flight& coarse_traj,
                      const Vector& z0_measured, const Matrix& controls, int steps) {
    const int D = ht.correction.state_dim();
    const int n = static_cast<int>(coarse_traj.states.cols());
    if (n < 1) throw std::invalid_argument("predict_hybrid: empty coarse trajectory");
    if (z0_measured.size() != D)
        throw std::invalid_argument("predict_hybrid: initial measurement has wrong dimension");
    if (steps < 0) steps = n - 1;
    if (steps + 1 > n)
        throw std::invalid_argument("predict_hybrid: coarse trajectory shorter than the horizon");

    const Vector c0 = z0_measured - coarse_traj.states.col(0);
    const Matrix correction = rollout(ht.correction, c0, controls, steps);
    return coarse_traj.states.leftCols(steps + 1) + correction;
}

}  // namespace stabledmd
