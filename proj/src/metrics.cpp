#include "stabledmd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "stabledmd/csv.hpp"
#include "stabledmd/errors.hpp"

namespace stabledmd {

namespace {

void check_aligned(const TrajectoryDataset& a, const TrajectoryDataset& b, const char* what) {
    if (a.state_dim != b.state_dim)
        throw AlignmentError(std::string(what) + ": state dimensions differ");
    if (a.flights.size() != b.flights.size())
        throw AlignmentError(std::string(what) + ": flight counts differ");
    if (a.dt != b.dt) throw AlignmentError(std::string(what) + ": time steps differ");
    for (const Flight& fa : a.flights) {
        if (!b.has_flight(fa.id))
            throw AlignmentError(std::string(what) + ": flight '" + fa.id +
                                 "' missing from the reference");
        const Flight& fb = b.flight(fa.id);
        if (fa.states.cols() != fb.states.cols())
            throw AlignmentError(std::string(what) + ": flight '" + fa.id +
                                 "' has mismatched snapshot counts");
    }
}

std::vector<int> excluded_from(const Vector& ranges) {
    std::vector<int> out;
    for (Eigen::Index i = 0; i < ranges.size(); ++i)
        if (!(ranges(i) > 0.0) || !std::isfinite(ranges(i))) out.push_back(static_cast<int>(i));
    return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    return out;
}

}  // namespace

Vector variable_ranges(const TrajectoryDataset& dataset) {
    const int D = dataset.state_dim;
    Vector lo = Vector::Constant(D, std::numeric_limits<double>::infinity());
    Vector hi = Vector::Constant(D, -std::numeric_limits<double>::infinity());
    for (const Flight& f : dataset.flights) {
        if (f.states.cols() == 0) continue;
        lo = lo.cwiseMin(f.states.rowwise().minCoeff());
        hi = hi.cwiseMax(f.states.rowwise().maxCoeff());
    }
    if (dataset.total_snapshots() == 0) return Vector::Zero(D);
    return hi - lo;
}

ErrorReport normalized_error(const TrajectoryDataset& predicted,
                             const TrajectoryDataset& ground_truth, const Vector& ranges) {
    check_aligned(predicted, ground_truth, "normalized_error");
    if (ranges.size() != ground_truth.state_dim)
        throw std::invalid_argument("normalized_error: range vector has wrong length");

    ErrorReport report;
    report.ranges = ranges;
    report.excluded_variables = excluded_from(ranges);
    report.dt = ground_truth.dt;

    Vector inv = Vector::Zero(ranges.size());
    for (Eigen::Index i = 0; i < ranges.size(); ++i)
        if (ranges(i) > 0.0 && std::isfinite(ranges(i))) inv(i) = 1.0 / ranges(i);

    for (const Flight& gt : ground_truth.flights) {
        const Flight& pred = predicted.flight(gt.id);
        Matrix err = (gt.states - pred.states).array().colwise() * inv.array();
        report.flight_ids.push_back(gt.id);
        report.errors.push_back(std::move(err));
        report.flight_t0.push_back(gt.t0);
    }
    return report;
}

MeasurementBound measurement_error_bound(const TrajectoryDataset& measured,
                                         const TrajectoryDataset& ground_truth,
                                         const Vector& ranges) {
    check_aligned(measured, ground_truth, "measurement_error_bound");
    if (ranges.size() != ground_truth.state_dim)
        throw std::invalid_argument("measurement_error_bound: range vector has wrong length");

    const int D = ground_truth.state_dim;
    MeasurementBound bound;
    bound.signed_max = Vector::Constant(D, -std::numeric_limits<double>::infinity());
    bound.abs_max = Vector::Zero(D);
    bound.excluded_variables = excluded_from(ranges);

    for (const Flight& gt : ground_truth.flights) {
        const Flight& meas = measured.flight(gt.id);
        const Matrix diff = gt.states - meas.states;
        if (diff.cols() == 0) continue;
        bound.signed_max = bound.signed_max.cwiseMax(diff.rowwise().maxCoeff());
        bound.abs_max = bound.abs_max.cwiseMax(diff.cwiseAbs().rowwise().maxCoeff());
    }
    for (int i = 0; i < D; ++i) {
        if (ranges(i) > 0.0 && std::isfinite(ranges(i))) {
            bound.signed_max(i) /= ranges(i);
            bound.abs_max(i) /= ranges(i);
        } else {
            bound.signed_max(i) = 0.0;
            bound.abs_max(i) = 0.0;
        }
    }
    return bound;
}

namespace {

std::vector<double> per_flight_reduce(const ErrorReport& report, bool absolute) {
    std::vector<char> included(static_cast<size_t>(report.ranges.size()), 1);
    for (int i : report.excluded_variables) included[static_cast<size_t>(i)] = 0;

    std::vector<double> means;
    means.reserve(report.errors.size());
    for (const Matrix& err : report.errors) {
        double acc = 0.0;
        long count = 0;
        for (Eigen::Index i = 0; i < err.rows(); ++i) {
            if (!included[static_cast<size_t>(i)]) continue;
            acc += absolute ? err.row(i).cwiseAbs().sum() : err.row(i).sum();
            count += err.cols();
        }
        means.push_back(count > 0 ? acc / static_cast<double>(count) : 0.0);
    }
    return means;
}

}  // namespace

std::vector<double> per_flight_mean_error(const ErrorReport& report) {
    return per_flight_reduce(report, false);
}

std::vector<double> per_flight_mean_abs_error(const ErrorReport& report) {
    return per_flight_reduce(report, true);
}

void write_error_csv(const ErrorReport& report, const std::filesystem::path& path) {
    std::ofstream out = open_out(path);
    out << "flight,variable,t,err\n";
    for (size_t f = 0; f < report.errors.size(); ++f) {
        const Matrix& err = report.errors[f];
        for (Eigen::Index i = 0; i < err.rows(); ++i) {
            for (Eigen::Index k = 0; k < err.cols(); ++k) {
                const double t = report.flight_t0[f] + static_cast<double>(k) * report.dt;
                out << report.flight_ids[f] << ",z" << (i + 1) << ',' << format_double(t) << ','
                    << format_double(err(i, k)) << '\n';
            }
        }
    }
}

void write_summary_csv(const ErrorReport& report, const std::vector<double>& per_flight_mean,
                       double err_max_meas, const std::filesystem::path& path,
                       const std::string& mean_column, const std::string& bound_column) {
    if (per_flight_mean.size() != report.flight_ids.size())
        throw std::invalid_argument("write_summary_csv: one mean per flight required");
    std::ofstream out = open_out(path);
    out << "flight," << mean_column << ',' << bound_column << '\n';
    for (size_t f = 0; f < report.flight_ids.size(); ++f)
        out << report.flight_ids[f] << ',' << format_double(per_flight_mean[f]) << ','
            << format_double(err_max_meas) << '\n';
}

void write_bounds_csv(const MeasurementBound& bound, const std::filesystem::path& path) {
    std::ofstream out = open_out(path);
    out << "variable,err_max_meas,err_max_meas_abs\n";
    for (Eigen::Index i = 0; i < bound.signed_max.size(); ++i)
        out << 'z' << (i + 1) << ',' << format_double(bound.signed_max(i)) << ','
            << format_double(bound.abs_max(i)) << '\n';
}

}  // namespace stabledmd
