#include "stabledmd/datagen.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "stabledmd/dmdc.hpp"
#include "stabledmd/metrics.hpp"
#include "stabledmd/regression.hpp"
#include "stabledmd/stabilization.hpp"

namespace stabledmd {

namespace {

// SplitMix64. Self-contained so the generated bytes do not depend on the
// standard library's distribution implementations.
struct Rng {
    std::uint64_t state;

    explicit Rng(std::uint64_t seed) : state(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(next_u64() %
                                     static_cast<std::uint64_t>(static_cast<long long>(hi) - lo + 1));
    }
    double gaussian() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }
};

struct Plant {
    Matrix A;    // block lower triangular: slow block decoupled from the fast pair
    Matrix B;
    Matrix Wnl;  // 2 x n_slow weights feeding the saturating nonlinearity
    double gain = 0.0;
    double sharpness = 1.0;
    bool nonlinear = false;
    double rho = 0.0;

    int state_dim() const { return static_cast<int>(A.rows()); }
    int slow_dim() const { return state_dim() - 2; }

    Vector step(const Vector& z, const Vector& u) const {
        Vector zn = A * z + B * u;
        if (nonlinear) {
            const Vector s = Wnl * z.head(slow_dim());
            zn(state_dim() - 2) += gain * std::tanh(sharpness * s(0));
            zn(state_dim() - 1) += gain * std::tanh(sharpness * s(1));
        }
        return zn;
    }
};

// The raw random draws, kept so the coarse model can be derived from the
// same plant by perturbing parameters instead of matrix entries (which
// would risk destabilizing it).
struct PlantDraw {
    std::vector<double> slow_moduli;
    std::vector<double> slow_angles;  // one per 2x2 block; trailing scalar mode has angle 0
    Matrix A_fs;
    Matrix B;
    Matrix Wnl;
};

PlantDraw draw_plant(const PlantParams& p, int D, int d, Rng& rng) {
    const int n_slow = D - 2;
    PlantDraw draw;
    int covered = 0;
    while (covered + 2 <= n_slow) {
        draw.slow_moduli.push_back(rng.uniform(p.slow_modulus_min, p.slow_modulus_max));
        draw.slow_angles.push_back(rng.uniform(0.2 * p.slow_angle_max, p.slow_angle_max));
        covered += 2;
    }
    if (covered < n_slow) {  // odd slow count: one real mode
        draw.slow_moduli.push_back(rng.uniform(p.slow_modulus_min, p.slow_modulus_max));
        draw.slow_angles.push_back(0.0);
    }
    const double fs_scale = p.coupling_gain / std::sqrt(static_cast<double>(n_slow));
    draw.A_fs = Matrix::NullaryExpr(2, n_slow, [&](Eigen::Index, Eigen::Index) {
        return fs_scale * rng.gaussian();
    });
    draw.B = Matrix::NullaryExpr(D, d, [&](Eigen::Index i, Eigen::Index) {
        const double row_gain = i >= n_slow ? p.control_gain * p.fast_control_gain : p.control_gain;
        return row_gain * rng.gaussian();
    });
    draw.Wnl = Matrix::NullaryExpr(2, n_slow, [&](Eigen::Index, Eigen::Index) {
        return rng.gaussian() / std::sqrt(static_cast<double>(n_slow));
    });
    return draw;
}

Plant build_plant(const PlantDraw& draw, const PlantParams& p, int D, double fast_modulus,
                  double fast_angle, bool nonlinear) {
    const int n_slow = D - 2;
    Plant plant;
    plant.A = Matrix::Zero(D, D);
    int row = 0;
    for (size_t b = 0; b < draw.slow_moduli.size(); ++b) {
        const double m = draw.slow_moduli[b];
        const double th = draw.slow_angles[b];
        if (row + 2 <= n_slow && th != 0.0) {
            plant.A(row, row) = m * std::cos(th);
            plant.A(row, row + 1) = -m * std::sin(th);
            plant.A(row + 1, row) = m * std::sin(th);
            plant.A(row + 1, row + 1) = m * std::cos(th);
            row += 2;
        } else {
            plant.A(row, row) = m;
            row += 1;
        }
    }
    plant.A(n_slow, n_slow) = fast_modulus * std::cos(fast_angle);
    plant.A(n_slow, n_slow + 1) = -fast_modulus * std::sin(fast_angle);
    plant.A(n_slow + 1, n_slow) = fast_modulus * std::sin(fast_angle);
    plant.A(n_slow + 1, n_slow + 1) = fast_modulus * std::cos(fast_angle);
    plant.A.block(n_slow, 0, 2, n_slow) = draw.A_fs;

    plant.B = draw.B;
    plant.Wnl = draw.Wnl;
    plant.gain = p.nonlinearity_gain;
    plant.sharpness = p.nonlinearity_sharpness;
    plant.nonlinear = nonlinear;
    plant.rho = fast_modulus;
    for (double m : draw.slow_moduli) plant.rho = std::max(plant.rho, m);
    return plant;
}

PlantDraw degrade(const PlantDraw& draw, double degradation, Rng& rng) {
    PlantDraw cm = draw;
    for (double& m : cm.slow_moduli)
        m = std::min(m * (1.0 + degradation * rng.uniform(-1.0, 1.0)), 0.9995);
    for (double& th : cm.slow_angles)
        if (th != 0.0) th *= 1.0 + degradation * rng.uniform(-1.0, 1.0);
    cm.A_fs = cm.A_fs.unaryExpr(
        [&](double v) { return v * (1.0 + degradation * rng.uniform(-1.0, 1.0)); });
    cm.B = cm.B.unaryExpr(
        [&](double v) { return v * (1.0 + degradation * rng.uniform(-1.0, 1.0)); });
    return cm;
}

std::string flight_name(int index) {
    std::ostringstream name;
    name << 'f';
    if (index < 9) name << '0';
    name << (index + 1);
    return name.str();
}

Matrix draw_controls(int d, int n, Rng& rng) {
    // Piecewise-constant random schedules: levels held over segments of a few
    // steps, emulating flight phases while staying persistently exciting.
    Matrix U(d, n);
    int k = 0;
    while (k < n) {
        const int len = rng.uniform_int(6, 18);
        Vector level(d);
        for (int j = 0; j < d; ++j) level(j) = rng.uniform(-1.2, 1.2);
        for (int s = 0; s < len && k < n; ++s, ++k) U.col(k) = level;
    }
    return U;
}

Matrix simulate(const Plant& plant, const Vector& z0, const Matrix& controls, double envelope) {
    const int n = static_cast<int>(controls.cols());
    Matrix Z(plant.state_dim(), n);
    Z.col(0) = z0;
    for (int k = 1; k < n; ++k) {
        Z.col(k) = plant.step(Z.col(k - 1), controls.col(k - 1));
        if (Z.col(k).cwiseAbs().maxCoeff() > envelope)
            throw std::runtime_error("data generation left the state envelope at step " +
                                     std::to_string(k) + "; soften the plant parameters");
    }
    return Z;
}

void check_config(const ScenarioConfig& cfg) {
    if (cfg.state_dim < 4)
        throw std::invalid_argument("generate_scenario: state_dim must be >= 4");
    if (cfg.control_dim < 1)
        throw std::invalid_argument("generate_scenario: control_dim must be >= 1");
    if (cfg.n_flights < 1) throw std::invalid_argument("generate_scenario: n_flights must be >= 1");
    if (cfg.horizon_min < 2 || cfg.horizon_max < cfg.horizon_min)
        throw std::invalid_argument("generate_scenario: invalid horizon bounds");
    if (!(cfg.dt > 0.0)) throw std::invalid_argument("generate_scenario: dt must be > 0");
    if (cfg.noise_sigma.size() != 0 && cfg.noise_sigma.size() != cfg.state_dim)
        throw std::invalid_argument("generate_scenario: noise_sigma must have one entry per state");
    if (!(cfg.state_envelope > 0.0))
        throw std::invalid_argument("generate_scenario: state_envelope must be > 0");
}

}  // namespace

Scenario generate_scenario(const ScenarioConfig& cfg) {
    check_config(cfg);
    const int D = cfg.state_dim;
    const int d = cfg.control_dim;
    Rng rng(cfg.seed);

    const PlantDraw gt_draw = draw_plant(cfg.plant, D, d, rng);
    const Plant gt_plant = build_plant(gt_draw, cfg.plant, D, cfg.plant.fast_modulus,
                                       cfg.plant.fast_angle, cfg.plant.nonlinearity);
    const PlantDraw cm_draw = degrade(gt_draw, cfg.cm_degradation, rng);
    const double cm_fast_modulus =
        std::min(cfg.plant.fast_modulus * (1.0 + cfg.cm_degradation * rng.uniform(-1.0, 1.0)),
                 0.9995);
    const double cm_fast_angle =
        cfg.plant.fast_angle * (1.0 + cfg.cm_degradation * rng.uniform(-1.0, 1.0));
    const Plant cm_plant =
        build_plant(cm_draw, cfg.plant, D, cm_fast_modulus, cm_fast_angle, false);

    Scenario scenario;
    scenario.config = cfg;
    scenario.gt_linear_rho = spectral_radius(gt_plant.A);
    if (!(scenario.gt_linear_rho < 1.0))
        throw std::invalid_argument(
            "generate_scenario: the configured plant has an unstable linear core (rho = " +
            std::to_string(scenario.gt_linear_rho) + ")");
    for (TrajectoryDataset* ds : {&scenario.gt, &scenario.cm, &scenario.ped}) {
        ds->state_dim = D;
        ds->control_dim = d;
        ds->dt = cfg.dt;
    }

    for (int f = 0; f < cfg.n_flights; ++f) {
        const int n = rng.uniform_int(cfg.horizon_min, cfg.horizon_max);
        Vector z0(D);
        for (int i = 0; i < D; ++i) z0(i) = (i < D - 2 ? 1.0 : 0.3) * rng.gaussian();
        const Matrix U = draw_controls(d, n, rng);

        Flight gt_flight;
        gt_flight.id = flight_name(f);
        gt_flight.controls = U;
        gt_flight.states = simulate(gt_plant, z0, U, cfg.state_envelope);

        Flight cm_flight = gt_flight;
        cm_flight.states = simulate(cm_plant, z0, U, cfg.state_envelope);

        scenario.gt.flights.push_back(std::move(gt_flight));
        scenario.cm.flights.push_back(std::move(cm_flight));
    }

    Vector sigma;
    if (cfg.noise_sigma.size() == D)
        sigma = cfg.noise_sigma;
    else
        sigma = cfg.noise_fraction * variable_ranges(scenario.gt);

    for (const Flight& gt_flight : scenario.gt.flights) {
        Flight ped_flight = gt_flight;
        for (Eigen::Index k = 0; k < ped_flight.states.cols(); ++k)
            for (int i = 0; i < D; ++i) ped_flight.states(i, k) += sigma(i) * rng.gaussian();
        scenario.ped.flights.push_back(std::move(ped_flight));
    }
    return scenario;
}

FeatureSpec unstable_case_feature_spec() { return FeatureSpec{}; }

UnstableFitCase generate_unstable_fit_case(const ScenarioConfig& base) {
    // A short, noisy record of a weakly unstable plant. Certify at generation
    // time that the unregularized fit really is unstable and that the
    // stabilized refit rolls out bounded, so downstream checks never depend
    // on luck with a particular seed.
    constexpr int kMaxAttempts = 400;
    const FeatureSpec spec = unstable_case_feature_spec();

    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        ScenarioConfig cfg = base;
        cfg.seed = base.seed + 0x9E3779B9ull * static_cast<std::uint64_t>(attempt);
        cfg.n_flights = 2;
        cfg.horizon_min = 9;
        cfg.horizon_max = 13;
        cfg.plant.nonlinearity = false;
        cfg.plant.slow_modulus_min = 0.995;
        cfg.plant.slow_modulus_max = 0.9995;
        cfg.plant.slow_angle_max = 0.06;
        cfg.plant.fast_modulus = 0.6;
        cfg.plant.coupling_gain = 0.1;
        cfg.noise_fraction = 0.03;
        cfg.noise_sigma = Vector();
        cfg.state_envelope = 1e6;

        Scenario scenario;
        try {
            scenario = generate_scenario(cfg);
        } catch (const std::runtime_error&) {
            continue;  // left the envelope; try the next seed
        }

        const SnapshotSystem sys = assemble_snapshots(scenario.ped, {}, spec);
        const ControlledLinearModel raw = fit_ols(sys);
        if (!(raw.spectral_radius_M > 1.01)) continue;

        const Vector z0 = scenario.ped.flights.front().states.col(0);
        const Matrix zero_u = Matrix::Zero(cfg.control_dim, 1000);
        try {
            const Matrix free_run = rollout(raw, z0, zero_u, 1000);
            const double peak = free_run.cwiseAbs().maxCoeff();
            if (!(peak > 1e6) || !(peak < 1e11)) continue;

            const ControlledLinearModel stable = fit_stable(sys, RidgeConfig{}, StabilizationConfig{});
            const Matrix tamed = rollout(stable, z0, zero_u, 1000);
            if (!(tamed.cwiseAbs().maxCoeff() <= 1e3 * z0.norm())) continue;
        } catch (const DivergenceError&) {
            continue;  // blew past the hard cap; prefer a milder instance
        } catch (const SearchError&) {
            continue;
        }

        UnstableFitCase result;
        result.data = std::move(scenario.ped);
        result.seed_used = cfg.seed;
        result.attempts = attempt + 1;
        result.rho_unregularized = raw.spectral_radius_M;
        return result;
    }
    throw SearchError("generate_unstable_fit_case: no certifiable seed within " +
                      std::to_string(kMaxAttempts) + " attempts");
}

}  // namespace stabledmd
