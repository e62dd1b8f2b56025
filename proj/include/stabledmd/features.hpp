#pragma once

#include <Eigen/Dense>

namespace stabledmd {

struct Flight;

/// Selects which blocks enter the stacked control-feature vector, in order
/// [mu_n; mu_{n-1}; omega_n; W_n]. omega is the running time integral of mu
/// and W the running integral of omega; both restart at every flight start.
/// The lag is initialized with mu_{-1} := mu_0 so no artificial transient is
/// injected at the first snapshot.
struct FeatureSpec {
    bool include_control = true;
    bool include_lagged_control = false;
    bool include_omega = false;
    bool include_W = false;
    bool standardize = false;

    // Per-variable affine transform of the *state* block, fitted over the
    // training columns when standardize is set (empty otherwise). Rollouts
    // work in transformed coordinates and invert it on output.
    Eigen::VectorXd state_shift;
    Eigen::VectorXd state_scale;

    int enabled_blocks() const {
        return int(include_control) + int(include_lagged_control) +
               int(include_omega) + int(include_W);
    }
    bool uses_lag() const { return include_lagged_control; }
    bool has_standardization() const { return standardize && state_scale.size() > 0; }
};

/// Total control-feature dimension for raw control dimension d.
int d_prime(const FeatureSpec& spec, int control_dim);

/// Feature columns for a d x n control sequence sampled at uniform dt.
/// Column k holds the enabled blocks evaluated at step k.
Eigen::MatrixXd control_feature_matrix(const Eigen::MatrixXd& controls,
                                       const FeatureSpec& spec, double dt);

Eigen::MatrixXd control_features(const Flight& flight, const FeatureSpec& spec, double dt);

}  // namespace stabledmd
