#include <doctest.h>

#include <algorithm>

#include "stabledmd/types.hpp"
#include "test_util.hpp"

using namespace stabledmd;

namespace {

TrajectoryDataset two_flight_dataset(int D, int d, int len1, int len2, unsigned seed) {
    std::mt19937_64 gen(seed);
    TrajectoryDataset ds;
    ds.state_dim = D;
    ds.control_dim = d;
    ds.dt = 0.5;
    Flight a;
    a.id = "a";
    a.states = testutil::random_matrix(D, len1, gen);
    a.controls = testutil::random_matrix(d, len1, gen);
    Flight b;
    b.id = "b";
    b.states = testutil::random_matrix(D, len2, gen);
    b.controls = testutil::random_matrix(d, len2, gen);
    ds.flights = {a, b};
    return ds;
}

}  // namespace

TEST_CASE("assemble_snapshots pair count: flights of length 5 and 4 give 7 pairs") {
    TrajectoryDataset ds = two_flight_dataset(3, 2, 5, 4, 11);
    SnapshotSystem sys = assemble_snapshots(ds, {}, FeatureSpec{});
    CHECK(sys.pair_count == 7);
    CHECK(sys.X0.cols() == 7);
    CHECK(sys.X1.cols() == 7);
    CHECK(sys.U0.cols() == 7);
}

TEST_CASE("assemble_snapshots zero states give zero matrices of matching shape") {
    TrajectoryDataset ds;
    ds.state_dim = 4;
    ds.control_dim = 0;
    Flight f;
    f.id = "z";
    f.states = Matrix::Zero(4, 6);
    f.controls = Matrix(0, 6);
    ds.flights = {f};
    FeatureSpec spec;
    spec.include_control = false;
    SnapshotSystem sys = assemble_snapshots(ds, {}, spec);
    CHECK(sys.X0.rows() == 4);
    CHECK(sys.X0.cols() == 5);
    CHECK(sys.X0.isZero(0.0));
    CHECK(sys.X1.isZero(0.0));
    CHECK(sys.U0.rows() == 0);
}

TEST_CASE("assemble_snapshots honors the 8-state 3-control layout") {
    TrajectoryDataset ds = two_flight_dataset(8, 3, 10, 12, 5);
    SnapshotSystem sys = assemble_snapshots(ds, {}, FeatureSpec{});
    CHECK(sys.X0.rows() == 8);
    CHECK(sys.U0.rows() == 3);
    CHECK(sys.pair_count == 20);
}

TEST_CASE("X1 column k is the dataset state one step after the X0 column") {
    TrajectoryDataset ds = two_flight_dataset(3, 1, 6, 5, 17);
    SnapshotSystem sys = assemble_snapshots(ds, {}, FeatureSpec{});
    int col = 0;
    for (const Flight& f : ds.flights) {
        for (int k = 0; k + 1 < f.n_snapshots(); ++k, ++col) {
            CHECK((sys.X0.col(col) - f.states.col(k)).norm() == 0.0);
            CHECK((sys.X1.col(col) - f.states.col(k + 1)).norm() == 0.0);
        }
    }
    CHECK(col == sys.pair_count);
}

TEST_CASE("shuffling flight order permutes but preserves the column triples") {
    TrajectoryDataset ds = two_flight_dataset(4, 2, 7, 9, 23);
    SnapshotSystem fwd = assemble_snapshots(ds, {"a", "b"}, FeatureSpec{});
    SnapshotSystem rev = assemble_snapshots(ds, {"b", "a"}, FeatureSpec{});
    REQUIRE(fwd.pair_count == rev.pair_count);

    const auto column_key = [](const SnapshotSystem& s, int k) {
        std::vector<double> key;
        for (Eigen::Index i = 0; i < s.X0.rows(); ++i) key.push_back(s.X0(i, k));
        for (Eigen::Index i = 0; i < s.X1.rows(); ++i) key.push_back(s.X1(i, k));
        for (Eigen::Index i = 0; i < s.U0.rows(); ++i) key.push_back(s.U0(i, k));
        return key;
    };
    std::vector<std::vector<double>> lhs, rhs;
    for (int k = 0; k < fwd.pair_count; ++k) {
        lhs.push_back(column_key(fwd, k));
        rhs.push_back(column_key(rev, k));
    }
    std::sort(lhs.begin(), lhs.end());
    std::sort(rhs.begin(), rhs.end());
    CHECK(lhs == rhs);
}

TEST_CASE("assemble_snapshots rejects unknown ids and too-short flights") {
    TrajectoryDataset ds = two_flight_dataset(3, 2, 5, 4, 31);
    CHECK_THROWS_AS(assemble_snapshots(ds, {"nope"}, FeatureSpec{}), std::invalid_argument);

    ds.flights[1].states = ds.flights[1].states.leftCols(1).eval();
    ds.flights[1].controls = ds.flights[1].controls.leftCols(1).eval();
    CHECK_THROWS_AS(assemble_snapshots(ds, {}, FeatureSpec{}), std::invalid_argument);
}

TEST_CASE("lagged features demand at least 3 snapshots per flight") {
    TrajectoryDataset ds = two_flight_dataset(3, 2, 5, 2, 37);
    FeatureSpec lagged;
    lagged.include_lagged_control = true;
    CHECK_NOTHROW(assemble_snapshots(ds, {"a"}, lagged));
    CHECK_THROWS_AS(assemble_snapshots(ds, {"b"}, lagged), std::invalid_argument);
}

TEST_CASE("dataset validation catches structural breakage") {
    TrajectoryDataset ds = two_flight_dataset(3, 2, 5, 4, 41);
    CHECK_NOTHROW(ds.validate());

    SUBCASE("duplicate ids") {
        ds.flights[1].id = "a";
        CHECK_THROWS_AS(ds.validate(), std::invalid_argument);
    }
    SUBCASE("state dimension mismatch") {
        ds.flights[0].states = Matrix::Zero(2, 5);
        CHECK_THROWS_AS(ds.validate(), std::invalid_argument);
    }
    SUBCASE("states and controls of different lengths") {
        ds.flights[0].controls = ds.flights[0].controls.leftCols(4).eval();
        CHECK_THROWS_AS(ds.validate(), std::invalid_argument);
    }
    SUBCASE("nonpositive dt") {
        ds.dt = 0.0;
        CHECK_THROWS_AS(ds.validate(), std::invalid_argument);
    }
}

TEST_CASE("subset keeps requested flights in the requested order") {
    TrajectoryDataset ds = two_flight_dataset(3, 1, 5, 6, 47);
    TrajectoryDataset sub = ds.subset({"b"});
    REQUIRE(sub.flights.size() == 1);
    CHECK(sub.flights[0].id == "b");
    CHECK(sub.state_dim == ds.state_dim);
    CHECK(sub.dt == ds.dt);
    CHECK_THROWS_AS(ds.subset({"missing"}), std::invalid_argument);
}

TEST_CASE("standardization is fitted over training columns and reused when present") {
    TrajectoryDataset ds = two_flight_dataset(3, 1, 20, 25, 53);
    FeatureSpec spec;
    spec.standardize = true;
    SnapshotSystem sys = assemble_snapshots(ds, {}, spec);

    REQUIRE(sys.feature_spec.has_standardization());
    // Columns of X0 together with the final X1 column cover all snapshots;
    // check mean/std of the fitted transform against a direct computation.
    Vector mean = Vector::Zero(3);
    int total = 0;
    for (const Flight& f : ds.flights) {
        mean += f.states.rowwise().sum();
        total += f.n_snapshots();
    }
    mean /= double(total);
    Vector var = Vector::Zero(3);
    for (const Flight& f : ds.flights)
        var += (f.states.colwise() - mean).array().square().matrix().rowwise().sum();
    var /= double(total);
    CHECK((sys.feature_spec.state_shift - mean).norm() < 1e-12);
    CHECK((sys.feature_spec.state_scale - var.array().sqrt().matrix()).norm() < 1e-12);

    // X0 holds transformed states.
    const Flight& a = ds.flights[0];
    Vector expect = (a.states.col(0) - mean).cwiseQuotient(sys.feature_spec.state_scale);
    CHECK((sys.X0.col(0) - expect).norm() < 1e-12);

    // A spec that already carries a transform is reused, not refitted.
    FeatureSpec reuse = sys.feature_spec;
    SnapshotSystem sys2 = assemble_snapshots(ds, {"a"}, reuse);
    CHECK((sys2.feature_spec.state_shift - mean).norm() == 0.0);

    // Constant variables fall back to unit scale.
    TrajectoryDataset flat = ds;
    for (Flight& f : flat.flights) f.states.row(1).setConstant(4.2);
    SnapshotSystem sys3 = assemble_snapshots(flat, {}, spec);
    CHECK(sys3.feature_spec.state_scale(1) == 1.0);
}
