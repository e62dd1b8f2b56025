#include "stabledmd/features.hpp"

#include <stdexcept>

#include "stabledmd/types.hpp"

namespace stabledmd {

int d_prime(const FeatureSpec& spec, int control_dim) {
    if (control_dim < 0) throw std::invalid_argument("d_prime: control_dim must be >= 0");
    return control_dim * spec.enabled_blocks();
}

Eigen::MatrixXd control_feature_matrix(const Eigen::MatrixXd& controls, const FeatureSpec& spec,
                                       double dt) {
    const int d = static_cast<int>(controls.rows());
    const int n = static_cast<int>(controls.cols());
    if (spec.enabled_blocks() > 0 && d == 0)
        throw std::invalid_argument("control features requested but the system has no controls");
    if (dt <= 0.0) throw std::invalid_argument("control_feature_matrix: dt must be positive");

    const int dp = d_prime(spec, d);
    Eigen::MatrixXd features(dp, n);
    if (dp == 0 || n == 0) return features;

    // Left-rectangle cumulative sums with uniform dt; omega_k includes mu_k.
    Eigen::MatrixXd omega;
    Eigen::MatrixXd bigW;
    if (spec.include_omega || spec.include_W) {
        omega.resize(d, n);
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
        for (int k = 0; k < n; ++k) {
            acc += controls.col(k) * dt;
            omega.col(k) = acc;
        }
    }
    if (spec.include_W) {
        bigW.resize(d, n);
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
        for (int k = 0; k < n; ++k) {
            acc += omega.col(k) * dt;
            bigW.col(k) = acc;
        }
    }

    int row = 0;
    if (spec.include_control) {
        features.middleRows(row, d) = controls;
        row += d;
    }
    if (spec.include_lagged_control) {
        features.block(row, 0, d, 1) = controls.col(0);  // mu_{-1} := mu_0
        if (n > 1) features.block(row, 1, d, n - 1) = controls.leftCols(n - 1);
        row += d;
    }
    if (spec.include_omega) {
        features.middleRows(row, d) = omega;
        row += d;
    }
    if (spec.include_W) {
        features.middleRows(row, d) = bigW;
        row += d;
    }
    return features;
}

Eigen::MatrixXd control_features(const Flight& flight, const FeatureSpec& spec, double dt) {
    if (flight.n_snapshots() < 2)
        throw std::invalid_argument("control_features: flight '" + flight.id +
                                    "' has fewer than 2 snapshots");
    return control_feature_matrix(flight.controls, spec, dt);
}

}  // namespace stabledmd
