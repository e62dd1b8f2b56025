#include <doctest.h>

#include <random>

#include "stabledmd/hybrid_twin.hpp"
#include "test_util.hpp"

using namespace stabledmd;

namespace {

// Measured = coarse + an independently generated residual trajectory per
// flight (same ids, same controls).
TrajectoryDataset add_residual(const TrajectoryDataset& coarse, const Matrix& A_res,
                               unsigned seed) {
    std::mt19937_64 gen(seed);
    TrajectoryDataset out = coarse;
    for (Flight& f : out.flights) {
        const int n = f.n_snapshots();
        Vector r0 = testutil::random_vector(coarse.state_dim, gen, 0.5);
        Matrix res = testutil::simulate_linear(A_res, Matrix(coarse.state_dim, 0), r0,
                                               Matrix(0, n - 1), n - 1);
        f.states += res;
    }
    return out;
}

}  // namespace

TEST_CASE("residuals of identical datasets vanish") {
    std::mt19937_64 gen(51);
    Matrix A = testutil::random_with_radius(4, 0.85, gen);
    Matrix B = testutil::random_matrix(4, 2, gen);
    TrajectoryDataset coarse = testutil::linear_dataset(A, B, 3, 30, 0.5, 601);

    ResidualDataset res = compute_residuals(coarse, coarse);
    REQUIRE(res.data.flights.size() == 3);
    for (const Flight& f : res.data.flights) {
        CHECK(f.states.norm() == 0.0);
        CHECK((f.controls - coarse.flight(f.id).controls).norm() == 0.0);
    }

    SUBCASE("the fitted hybrid twin then reproduces the coarse model exactly") {
        HybridTwinModel ht = fit_hybrid_twin(coarse, coarse, FeatureSpec{}, RidgeConfig{},
                                             StabilizationConfig{});
        CHECK(ht.correction.spectral_radius_M == 0.0);
        const Flight& f = coarse.flights[0];
        Matrix pred = predict_hybrid(ht, f, f.states.col(0), f.controls);
        CHECK((pred - f.states).norm() == 0.0);
    }
}

TEST_CASE("a zero coarse model leaves the measurement as the residual") {
    std::mt19937_64 gen(52);
    Matrix A = testutil::random_with_radius(3, 0.8, gen);
    TrajectoryDataset measured = testutil::linear_dataset(A, Matrix(3, 0), 2, 20, 1.0, 602);
    TrajectoryDataset zero = measured;
    for (Flight& f : zero.flights) f.states.setZero();

    ResidualDataset res = compute_residuals(measured, zero);
    for (const Flight& f : res.data.flights)
        CHECK((f.states - measured.flight(f.id).states).norm() == 0.0);
}

TEST_CASE("misaligned datasets are rejected") {
    std::mt19937_64 gen(53);
    Matrix A = testutil::random_with_radius(3, 0.8, gen);
    Matrix B = testutil::random_matrix(3, 1, gen);
    TrajectoryDataset coarse = testutil::linear_dataset(A, B, 2, 20, 1.0, 603);

    SUBCASE("missing flight") {
        TrajectoryDataset measured = coarse;
        measured.flights[1].id = "other";
        CHECK_THROWS_AS(compute_residuals(measured, coarse), AlignmentError);
    }
    SUBCASE("state dimension") {
        TrajectoryDataset measured = coarse;
        measured.state_dim = 4;
        CHECK_THROWS_AS(compute_residuals(measured, coarse), AlignmentError);
    }
    SUBCASE("time step") {
        TrajectoryDataset measured = coarse;
        measured.dt = 0.5;
        CHECK_THROWS_AS(compute_residuals(measured, coarse), AlignmentError);
    }
    SUBCASE("snapshot count") {
        TrajectoryDataset measured = coarse;
        measured.flights[0].states.conservativeResize(3, 15);
        measured.flights[0].controls.conservativeResize(1, 15);
        CHECK_THROWS_AS(compute_residuals(measured, coarse), AlignmentError);
    }
}

TEST_CASE("hybrid prediction is exactly coarse plus correction rollout") {
    std::mt19937_64 gen(54);
    Matrix A = testutil::random_with_radius(4, 0.9, gen);
    Matrix B = testutil::random_matrix(4, 2, gen);
    Matrix A_res = testutil::random_with_radius(4, 0.7, gen);
    TrajectoryDataset coarse = testutil::linear_dataset(A, B, 3, 40, 1.0, 604);
    TrajectoryDataset measured = add_residual(coarse, A_res, 605);

    HybridTwinModel ht =
        fit_hybrid_twin(measured, coarse, FeatureSpec{}, RidgeConfig{}, StabilizationConfig{});

    const Flight& cf = coarse.flights[1];
    const Flight& mf = measured.flights[1];
    Matrix pred = predict_hybrid(ht, cf, mf.states.col(0), mf.controls);

    Vector c0 = mf.states.col(0) - cf.states.col(0);
    Matrix correction = rollout(ht.correction, c0, mf.controls, 39);
    CHECK((pred - (cf.states + correction)).norm() == 0.0);

    SUBCASE("the learned correction closes most of the coarse-model gap") {
        double coarse_err = (cf.states - mf.states).norm();
        double ht_err = (pred - mf.states).norm();
        CHECK(ht_err < 0.05 * coarse_err);
    }

    SUBCASE("only the initial measurement enters the prediction") {
        Vector z0 = mf.states.col(0);
        Matrix again = predict_hybrid(ht, cf, z0, mf.controls);
        CHECK((pred - again).norm() == 0.0);  // deterministic

        // Later measured samples are not consulted at all: the call signature
        // only receives z0, so feeding a doctored z0 changes the output while
        // the original call is unaffected by any later-sample change.
        Matrix doctored = predict_hybrid(ht, cf, z0 * 2.0, mf.controls);
        CHECK((doctored - pred).norm() > 0.0);
    }

    SUBCASE("horizon handling") {
        Matrix short_pred = predict_hybrid(ht, cf, mf.states.col(0), mf.controls, 10);
        CHECK(short_pred.cols() == 11);
        CHECK((short_pred - pred.leftCols(11)).norm() == 0.0);
        CHECK_THROWS_AS(predict_hybrid(ht, cf, mf.states.col(0), mf.controls, 40),
                        std::invalid_argument);
    }
}

TEST_CASE("an unstable residual fit is stabilized automatically") {
    std::mt19937_64 gen(55);
    Matrix A = testutil::random_with_radius(4, 0.9, gen);
    Matrix B = testutil::random_matrix(4, 1, gen);
    Matrix A_res = testutil::random_with_radius(4, 1.05, gen);
    TrajectoryDataset coarse = testutil::linear_dataset(A, B, 3, 40, 1.0, 606);
    TrajectoryDataset measured = add_residual(coarse, A_res, 607);

    StabilizationConfig stab;
    HybridTwinModel ht = fit_hybrid_twin(measured, coarse, FeatureSpec{}, RidgeConfig{}, stab);
    CHECK(ht.correction.fit_report.stabilized);
    CHECK(ht.correction.fit_report.rho_at_lambda_zero > stab.rho_desired);
    CHECK(ht.correction.spectral_radius_M <= stab.rho_desired + 1e-12);

    SUBCASE("long hybrid predictions stay bounded") {
        // Extend the coarse trajectory far beyond the training horizon.
        const Flight& f0 = coarse.flights[0];
        Flight long_coarse;
        long_coarse.id = f0.id;
        std::mt19937_64 g2(608);
        long_coarse.controls = testutil::random_matrix(1, 1001, g2);
        long_coarse.states =
            testutil::simulate_linear(A, B, f0.states.col(0), long_coarse.controls, 1000);
        Vector z0 = f0.states.col(0) + Vector::Ones(4);
        Matrix pred = predict_hybrid(ht, long_coarse, z0, long_coarse.controls);
        CHECK(pred.allFinite());
        CHECK(pred.colwise().norm().maxCoeff() <
              1e4 * (1.0 + long_coarse.states.colwise().norm().maxCoeff()));
    }
}

TEST_CASE("residual standardization is carried through prediction") {
    std::mt19937_64 gen(56);
    Matrix A = testutil::random_with_radius(4, 0.9, gen);
    Matrix B = testutil::random_matrix(4, 2, gen);
    Matrix A_res = testutil::random_with_radius(4, 0.6, gen);
    TrajectoryDataset coarse = testutil::linear_dataset(A, B, 4, 40, 1.0, 609);

    // Mirrored residual pairs keep the empirical residual mean at zero (up to
    // summation roundoff), so standardization is essentially a pure diagonal
    // scaling and the scaled dynamics remain linear.
    TrajectoryDataset measured = coarse;
    for (size_t i = 0; i < measured.flights.size(); i += 2) {
        Vector r0 = testutil::random_vector(4, gen, 0.5);
        Matrix res = testutil::simulate_linear(A_res, Matrix(4, 0), r0, Matrix(0, 39), 39);
        measured.flights[i].states += res;
        measured.flights[i + 1].states -= res;
    }

    FeatureSpec spec;
    spec.standardize = true;
    HybridTwinModel ht = fit_hybrid_twin(measured, coarse, spec, RidgeConfig{},
                                         StabilizationConfig{});
    CHECK(ht.correction.feature_spec.has_standardization());
    CHECK(ht.correction.feature_spec.state_shift.cwiseAbs().maxCoeff() < 1e-14);

    const Flight& cf = coarse.flights[2];
    const Flight& mf = measured.flights[2];
    Matrix pred = predict_hybrid(ht, cf, mf.states.col(0), mf.controls);
    CHECK((pred - mf.states).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("prediction argument validation") {
    HybridTwinModel ht;
    ht.correction.M = 0.5 * Matrix::Identity(2, 2);
    ht.correction.N = Matrix(2, 0);
    ht.correction.feature_spec.include_control = false;
    ht.correction.raw_control_dim = 0;
    ht.correction.dt = 1.0;

    Flight coarse;
    coarse.id = "c";
    coarse.states = Matrix::Zero(2, 5);
    coarse.controls = Matrix(0, 5);

    CHECK_THROWS_AS(predict_hybrid(ht, coarse, Vector::Ones(3), Matrix(0, 0)),
                    std::invalid_argument);
    Flight empty = coarse;
    empty.states = Matrix(2, 0);
    CHECK_THROWS_AS(predict_hybrid(ht, empty, Vector::Ones(2), Matrix(0, 0)),
                    std::invalid_argument);

    Matrix ok = predict_hybrid(ht, coarse, Vector::Ones(2), Matrix(0, 0));
    CHECK(ok.cols() == 5);
    CHECK(ok(0, 0) == 1.0);
    CHECK(ok(0, 1) == 0.5);
}
