#pragma once

#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stabledmd/errors.hpp"
#include "stabledmd/features.hpp"

namespace stabledmd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr const char* kVersion = "0.1.0";

/// One uniformly sampled trajectory. Column k of states/controls is snapshot k.
struct Flight {
    std::string id;
    Matrix states;    // D x n
    Matrix controls;  // d x n (zero rows when the system has no controls)
    double t0 = 0.0;

    int n_snapshots() const { return static_cast<int>(states.cols()); }
};

/// A set of flights sharing dimensions and sampling interval. Immutable by
/// convention after construction; all fit/predict operations only read it.
struct TrajectoryDataset {
    std::vector<Flight> flights;
    int state_dim = 0;
    int control_dim = 0;
    double dt = 1.0;

    bool has_flight(const std::string& id) const;
    const Flight& flight(const std::string& id) const;
    std::vector<std::string> flight_ids() const;
    TrajectoryDataset subset(const std::vector<std::string>& ids) const;
    int total_snapshots() const;

    /// Checks the structural invariants (consistent dimensions, unique ids,
    /// >= 2 snapshots per flight, equal state/control lengths).
    void validate() const;
};

/// Training matrices assembled from consecutive-snapshot pairs. Pairs never
/// straddle a flight boundary. When the feature spec standardizes, X0/X1 hold
/// transformed states and feature_spec carries the fitted transform.
struct SnapshotSystem {
    Matrix X0;  // D  x n_s current states
    Matrix X1;  // D  x n_s next states
    Matrix U0;  // d' x n_s control features
    int pair_count = 0;
    FeatureSpec feature_spec;
    double dt = 1.0;
    int raw_control_dim = 0;

    int state_dim() const { return static_cast<int>(X0.rows()); }
    int feature_dim() const { return static_cast<int>(U0.rows()); }

    /// [X0; U0], the regressor block shared by all fit routines.
    Matrix stacked_regressors() const;
};

struct FitReport {
    double residual_frobenius = 0.0;
    int lambda_search_iterations = 0;
    double rho_at_lambda_zero = std::numeric_limits<double>::quiet_NaN();
    bool stabilized = false;
};

/// Discrete linear model Z_{n+1} = M Z_n + N u'_n, where u' is the stacked
/// control-feature vector described by feature_spec.
struct ControlledLinearModel {
    Matrix M;  // D x D
    Matrix N;  // D x d' (zero columns when no control features)
    double lambda = 0.0;
    double spectral_radius_M = 0.0;
    FeatureSpec feature_spec;
    FitReport fit_report;
    double dt = 1.0;
    int raw_control_dim = 0;

    int state_dim() const { return static_cast<int>(M.rows()); }
    int feature_dim() const { return static_cast<int>(N.cols()); }
};

/// Projection of a controlled model onto the leading left singular subspace
/// of the (augmented) output matrix. Columns of Xi are orthonormal.
struct ReducedControlledModel {
    Matrix M_hat;  // r x r
    Matrix N_hat;  // r x d'
    Matrix Xi;     // D x r
    int r = 0;
    int r_tilde = 0;
    double lambda = 0.0;
    FeatureSpec feature_spec;
    double dt = 1.0;
    int raw_control_dim = 0;

    int state_dim() const { return static_cast<int>(Xi.rows()); }
    int feature_dim() const { return static_cast<int>(N_hat.cols()); }
};

/// Stacks consecutive-snapshot pairs of the selected flights, flight by
/// flight in the given order, time ascending. An empty id list selects every
/// flight. Control features are built per flight so integral features never
/// leak across flights.
SnapshotSystem assemble_snapshots(const TrajectoryDataset& dataset,
                                  const std::vector<std::string>& flight_ids,
                                  const FeatureSpec& spec);

}  // namespace stabledmd
