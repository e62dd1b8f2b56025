#include "stabledmd/types.hpp"

#include <algorithm>
#include <unordered_set>

namespace stabledmd {

bool TrajectoryDataset::has_flight(const std::string& id) const {
    return std::any_of(flights.begin(), flights.end(),
                       [&](const Flight& f) { return f.id == id; });
}

const Flight& TrajectoryDataset::flight(const std::string& id) const {
    for (const Flight& f : flights)
        if (f.id == id) return f;
    throw std::invalid_argument("unknown flight id '" + id + "'");
}

std::vector<std::string> TrajectoryDataset::flight_ids() const {
    std::vector<std::string> ids;
    ids.reserve(flights.size());
    for (const Flight& f : flights) ids.push_back(f.id);
    return ids;
}

TrajectoryDataset TrajectoryDataset::subset(const std::vector<std::string>& ids) const {
    TrajectoryDataset out;
    out.state_dim = state_dim;
    out.control_dim = control_dim;
    out.dt = dt;
    out.flights.reserve(ids.size());
    for (const std::string& id : ids) out.flights.push_back(flight(id));
    return out;
}

int TrajectoryDataset::total_snapshots() const {
    int n = 0;
    for (const Flight& f : flights) n += f.n_snapshots();
    return n;
}

void TrajectoryDataset::validate() const {
    if (state_dim <= 0) throw std::invalid_argument("dataset: state_dim must be positive");
    if (control_dim < 0) throw std::invalid_argument("dataset: control_dim must be >= 0");
    if (dt <= 0.0) throw std::invalid_argument("dataset: dt must be positive");
    std::unordered_set<std::string> seen;
    for (const Flight& f : flights) {
        if (!seen.insert(f.id).second)
            throw std::invalid_argument("dataset: duplicate flight id '" + f.id + "'");
        if (f.states.rows() != state_dim)
            throw std::invalid_argument("dataset: flight '" + f.id + "' state dimension mismatch");
        if (f.controls.rows() != control_dim)
            throw std::invalid_argument("dataset: flight '" + f.id + "' control dimension mismatch");
        if (f.n_snapshots() < 2)
            throw std::invalid_argument("dataset: flight '" + f.id + "' has fewer than 2 snapshots");
        if (f.controls.cols() != f.states.cols())
            throw std::invalid_argument("dataset: flight '" + f.id +
                                        "' states and controls have different lengths");
    }
}

Matrix SnapshotSystem::stacked_regressors() const {
    Matrix Y0(X0.rows() + U0.rows(), pair_count);
    Y0.topRows(X0.rows()) = X0;
    if (U0.rows() > 0) Y0.bottomRows(U0.rows()) = U0;
    return Y0;
}

SnapshotSystem assemble_snapshots(const TrajectoryDataset& dataset,
                                  const std::vector<std::string>& flight_ids,
                                  const FeatureSpec& spec) {
    dataset.validate();
    const std::vector<std::string> ids = flight_ids.empty() ? dataset.flight_ids() : flight_ids;
    if (ids.empty()) throw std::invalid_argument("assemble_snapshots: no flights selected");

    const int D = dataset.state_dim;
    const int dp = d_prime(spec, dataset.control_dim);
    const int min_len = spec.uses_lag() ? 3 : 2;

    int n_s = 0;
    for (const std::string& id : ids) {
        const Flight& f = dataset.flight(id);
        if (f.n_snapshots() < min_len)
            throw std::invalid_argument("assemble_snapshots: flight '" + id +
                                        "' too short for the requested features");
        n_s += f.n_snapshots() - 1;
    }

    SnapshotSystem sys;
    sys.X0.resize(D, n_s);
    sys.X1.resize(D, n_s);
    sys.U0.resize(dp, n_s);
    sys.pair_count = n_s;
    sys.dt = dataset.dt;
    sys.raw_control_dim = dataset.control_dim;

    int col = 0;
    for (const std::string& id : ids) {
        const Flight& f = dataset.flight(id);
        const int n = f.n_snapshots();
        sys.X0.middleCols(col, n - 1) = f.states.leftCols(n - 1);
        sys.X1.middleCols(col, n - 1) = f.states.rightCols(n - 1);
        if (dp > 0) {
            const Matrix feats = control_features(f, spec, dataset.dt);
            sys.U0.middleCols(col, n - 1) = feats.leftCols(n - 1);
        }
        col += n - 1;
    }

    FeatureSpec fitted = spec;
    if (spec.standardize) {
        if (!spec.has_standardization()) {
            // Fit the transform over every snapshot of the selected flights.
            Vector mean = Vector::Zero(D);
            int total = 0;
            for (const std::string& id : ids) {
                const Flight& f = dataset.flight(id);
                mean += f.states.rowwise().sum();
                total += f.n_snapshots();
            }
            mean /= double(total);
            Vector var = Vector::Zero(D);
            for (const std::string& id : ids) {
                const Flight& f = dataset.flight(id);
                var += (f.states.colwise() - mean).array().square().matrix().rowwise().sum();
            }
            var /= double(total);
            Vector scale = var.array().sqrt();
            for (int i = 0; i < D; ++i)
                if (scale(i) <= 0.0) scale(i) = 1.0;  // constant variable
            fitted.state_shift = mean;
            fitted.state_scale = scale;
        }
        sys.X0 = (sys.X0.colwise() - fitted.state_shift).array().colwise() /
                 fitted.state_scale.array();
        sys.X1 = (sys.X1.colwise() - fitted.state_shift).array().colwise() /
                 fitted.state_scale.array();
    }
    sys.feature_spec = fitted;
    return sys;
}

}  // namespace stabledmd
