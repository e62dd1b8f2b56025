#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "stabledmd/types.hpp"

namespace stabledmd {

/// Signed normalized errors (reference - prediction) / range, one matrix per
/// flight. Variables with zero range are excluded from every aggregate and
/// their rows zeroed.
struct ErrorReport {
    std::vector<std::string> flight_ids;
    std::vector<Matrix> errors;  // per flight: D x n
    Vector ranges;
    std::vector<int> excluded_variables;
    std::vector<double> flight_t0;
    double dt = 1.0;
};

/// Per-variable measurement-noise bound. signed_max is max over time of the
/// signed difference (reference - measured) / range; abs_max is the
/// sign-symmetric variant, reported alongside because the signed version is
/// asymmetric under noise sign flips.
struct MeasurementBound {
    Vector signed_max;
    Vector abs_max;
    std::vector<int> excluded_variables;
};

/// max - min of every variable over all flights of the dataset.
Vector variable_ranges(const TrajectoryDataset& dataset);

ErrorReport normalized_error(const TrajectoryDataset& predicted,
                             const TrajectoryDataset& ground_truth, const Vector& ranges);

MeasurementBound measurement_error_bound(const TrajectoryDataset& measured,
                                         const TrajectoryDataset& ground_truth,
                                         const Vector& ranges);

/// Arithmetic mean of the signed error over time and included variables.
std::vector<double> per_flight_mean_error(const ErrorReport& report);

/// Mean of |err|; the variant used when comparing model quality.
std::vector<double> per_flight_mean_abs_error(const ErrorReport& report);

// CSV exports, plot-ready.
// errors:  flight,variable,t,err
// summary: flight,mean_err,err_max_meas
// bounds:  variable,err_max_meas,err_max_meas_abs
void write_error_csv(const ErrorReport& report, const std::filesystem::path& path);
void write_summary_csv(const ErrorReport& report, const std::vector<double>& per_flight_mean,
                       double err_max_meas, const std::filesystem::path& path,
                       const std::string& mean_column = "mean_err",
                       const std::string& bound_column = "err_max_meas");
void write_bounds_csv(const MeasurementBound& bound, const std::filesystem::path& path);

}  // namespace stabledmd
