#pragma once

#include <cstdint>

#include "stabledmd/types.hpp"

namespace stabledmd {

/// Reference plant used to synthesize benchmark data: a stable linear core
/// with slow oscillatory modes, one fast mode pair, and a saturating
/// nonlinearity feeding the two fast variables. The slow block is decoupled
/// from the fast one, so slow variables evolve exactly linearly.
struct PlantParams {
    double slow_modulus_min = 0.955;
    double slow_modulus_max = 0.992;
    double slow_angle_max = 0.12;     // radians per step
    double fast_modulus = 0.70;
    double fast_angle = 1.1;
    double control_gain = 0.35;
    double fast_control_gain = 3.0;   // multiplier on the fast rows of B
    double coupling_gain = 0.25;      // fast <- slow coupling strength
    double nonlinearity_gain = 0.8;
    double nonlinearity_sharpness = 1.6;
    bool nonlinearity = true;
};

struct ScenarioConfig {
    int state_dim = 8;
    int control_dim = 3;
    int n_flights = 16;
    int horizon_min = 80;   // snapshots per flight, inclusive bounds
    int horizon_max = 150;
    double dt = 0.5;
    std::uint64_t seed = 42;
    PlantParams plant;
    double cm_degradation = 0.05;  // parameter perturbation scale of the coarse model
    double noise_fraction = 0.015; // default sigma_i = fraction * range of variable i
    Vector noise_sigma;            // absolute per-variable sigma, overrides noise_fraction
    double state_envelope = 1e3;   // generation fails if any |z| exceeds this
};

/// gt: the reference plant. cm: same structure with perturbed parameters and
/// the nonlinearity removed, run from the same initial states and controls.
/// ped: gt plus independent zero-mean noise. Same seed, same bytes.
struct Scenario {
    TrajectoryDataset gt;
    TrajectoryDataset cm;
    TrajectoryDataset ped;
    ScenarioConfig config;
    double gt_linear_rho = 0.0;  // spectral radius of the linear core, < 1 by construction
};

Scenario generate_scenario(const ScenarioConfig& cfg);

/// A dataset on which the unregularized fit is certified unstable: few short
/// flights of a near-marginal plant observed with noise. Seeds are retried
/// until the unregularized spectral radius exceeds 1, the unregularized
/// rollout leaves norm 1e6 within 1000 steps, and the stabilized refit rolls
/// out bounded. The seed that produced the dataset is recorded.
struct UnstableFitCase {
    TrajectoryDataset data;
    std::uint64_t seed_used = 0;
    int attempts = 0;
    double rho_unregularized = 0.0;
};

UnstableFitCase generate_unstable_fit_case(const ScenarioConfig& base);

/// Feature spec under which the unstable-fit property is certified.
FeatureSpec unstable_case_feature_spec();

}  // namespace stabledmd
