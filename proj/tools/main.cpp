#include <CLI11.hpp>

#include <algorithm>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>
#include <vector>

#include "stabledmd/csv.hpp"
#include "stabledmd/datagen.hpp"
#include "stabledmd/dmdc.hpp"
#include "stabledmd/errors.hpp"
#include "stabledmd/hybrid_twin.hpp"
#include "stabledmd/metrics.hpp"
#include "stabledmd/model_io.hpp"
#include "stabledmd/regression.hpp"
#include "stabledmd/stabilization.hpp"

namespace fs = std::filesystem;
using namespace stabledmd;

namespace {

// ---------------------------------------------------------------- plumbing

// Flat key=value manifest; one per run, enough to reproduce it.
struct Manifest {
    std::vector<std::pair<std::string, std::string>> entries;

    void add(const std::string& key, const std::string& value) { entries.emplace_back(key, value); }
    void add(const std::string& key, const char* value) { entries.emplace_back(key, value); }
    void add(const std::string& key, double value) { entries.emplace_back(key, format_double(value)); }
    void add(const std::string& key, int value) { entries.emplace_back(key, std::to_string(value)); }
    void add(const std::string& key, std::uint64_t value) {
        entries.emplace_back(key, std::to_string(value));
    }
    void add(const std::string& key, bool value) { entries.emplace_back(key, value ? "1" : "0"); }

    void write(const fs::path& path) const {
        const fs::path tmp = path.string() + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
            for (const auto& [k, v] : entries) out << k << '=' << v << '\n';
        }
        fs::rename(tmp, path);
    }
};

void write_trajectory_atomic(const TrajectoryDataset& ds, const fs::path& path) {
    const fs::path tmp = path.string() + ".tmp";
    write_trajectory_csv(ds, tmp);
    fs::rename(tmp, path);
}

template <typename Fn>
void write_atomic(const fs::path& path, Fn&& writer) {
    const fs::path tmp = path.string() + ".tmp";
    writer(tmp);
    fs::rename(tmp, path);
}

std::string feature_flags_string(const FeatureSpec& spec) {
    std::string s = "z";
    if (spec.include_control) s += ",u";
    if (spec.include_lagged_control) s += ",ulag";
    if (spec.include_omega) s += ",omega";
    if (spec.include_W) s += ",W";
    return s;
}

FeatureSpec parse_feature_flags(const std::string& list) {
    FeatureSpec spec;
    spec.include_control = false;
    std::stringstream ss(list);
    std::string item;
    bool saw_state = false;
    while (std::getline(ss, item, ',')) {
        if (item == "z")
            saw_state = true;  // the state itself; always part of the regression
        else if (item == "u")
            spec.include_control = true;
        else if (item == "ulag")
            spec.include_lagged_control = true;
        else if (item == "omega")
            spec.include_omega = true;
        else if (item == "W")
            spec.include_W = true;
        else if (!item.empty())
            throw CLI::ValidationError("--features", "unknown feature '" + item + "'");
    }
    if (!saw_state) throw CLI::ValidationError("--features", "the state flag 'z' is required");
    return spec;
}

std::vector<std::string> split_ids(const std::string& list) {
    std::vector<std::string> ids;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) ids.push_back(item);
    }
    return ids;
}

double bound_scalar(const Vector& per_variable, const std::vector<int>& excluded) {
    std::vector<char> skip(static_cast<size_t>(per_variable.size()), 0);
    for (int i : excluded) skip[static_cast<size_t>(i)] = 1;
    double best = 0.0;
    for (Eigen::Index i = 0; i < per_variable.size(); ++i)
        if (!skip[static_cast<size_t>(i)]) best = std::max(best, per_variable(i));
    return best;
}

// ---------------------------------------------------------------- generate

struct GenerateOpts {
    std::string out_dir = ".";
    std::uint64_t seed = 42;
    int flights = 16;
    int state_dim = 8;
    int control_dim = 3;
    int horizon_min = 80;
    int horizon_max = 150;
    double dt = 0.5;
    double noise_fraction = 0.015;
    double cm_degradation = 0.05;
};

int run_generate(const GenerateOpts& o) {
    ScenarioConfig cfg;
    cfg.seed = o.seed;
    cfg.n_flights = o.flights;
    cfg.state_dim = o.state_dim;
    cfg.control_dim = o.control_dim;
    cfg.horizon_min = o.horizon_min;
    cfg.horizon_max = o.horizon_max;
    cfg.dt = o.dt;
    cfg.noise_fraction = o.noise_fraction;
    cfg.cm_degradation = o.cm_degradation;

    const Scenario scenario = generate_scenario(cfg);
    fs::create_directories(o.out_dir);
    write_trajectory_atomic(scenario.gt, fs::path(o.out_dir) / "gt.csv");
    write_trajectory_atomic(scenario.cm, fs::path(o.out_dir) / "cm.csv");
    write_trajectory_atomic(scenario.ped, fs::path(o.out_dir) / "ped.csv");

    Manifest m;
    m.add("command", "generate");
    m.add("version", std::string(kVersion));
    m.add("seed", o.seed);
    m.add("flights", o.flights);
    m.add("state_dim", o.state_dim);
    m.add("control_dim", o.control_dim);
    m.add("horizon_min", o.horizon_min);
    m.add("horizon_max", o.horizon_max);
    m.add("dt", o.dt);
    m.add("noise_fraction", o.noise_fraction);
    m.add("cm_degradation", o.cm_degradation);
    m.add("gt_linear_rho", scenario.gt_linear_rho);
    m.write(fs::path(o.out_dir) / "manifest.txt");

    std::cout << "wrote gt.csv, cm.csv, ped.csv to " << o.out_dir << " ("
              << scenario.gt.flights.size() << " flights, linear core rho "
              << format_double(scenario.gt_linear_rho) << ")\n";
    return 0;
}

// ---------------------------------------------------------------- fit

struct FitOpts {
    std::string data;
    std::string coarse;
    std::string out = "model.txt";
    std::string mode = "scratch";
    std::string features = "z,u";
    std::string train_flights;
    std::string method = "bisection";
    std::string solver = "augmented";
    double lambda = -1.0;  // < 0: search for the stabilizing value
    double rho_desired = 0.999;
    double f_tol = 1e-4;
    int rank = 0;     // SVD truncation of the regressors (dmdc mode); 0 = numerical rank
    double energy = 0.0;  // energy-based truncation; 0 = off
    int reduce = 0;   // reduced-order basis size; 0 = no reduced block
    int standardize = -1;  // -1 auto (on for hybrid), 0 off, 1 on
    bool penalize_control = false;
};

int run_fit(const FitOpts& o) {
    if (o.mode != "scratch" && o.mode != "dmdc" && o.mode != "hybrid")
        throw CLI::ValidationError("--mode", "expected scratch, dmdc, or hybrid");
    if (o.mode == "hybrid" && o.coarse.empty())
        throw CLI::ValidationError("--coarse", "hybrid mode needs a coarse trajectory file");

    FeatureSpec spec = parse_feature_flags(o.features);
    spec.standardize = o.standardize == -1 ? o.mode == "hybrid" : o.standardize == 1;

    RidgeConfig ridge;
    ridge.penalize_control_block = o.penalize_control;
    if (o.solver == "per-row")
        ridge.solver = RidgeSolver::per_row_ridge;
    else if (o.solver != "augmented")
        throw CLI::ValidationError("--solver", "expected augmented or per-row");

    StabilizationConfig stab;
    stab.rho_desired = o.rho_desired;
    stab.f_tol = o.f_tol;
    if (o.method == "regula-falsi")
        stab.method = RootMethod::regula_falsi;
    else if (o.method != "bisection")
        throw CLI::ValidationError("--method", "expected bisection or regula-falsi");

    const TrajectoryDataset data = read_trajectory_csv(o.data);
    const std::vector<std::string> train_ids = split_ids(o.train_flights);

    SvdTruncation trunc;
    if (o.rank > 0 && o.energy > 0.0)
        throw CLI::ValidationError("--rank", "use either --rank or --energy, not both");
    if (o.rank > 0) trunc = SvdTruncation::fixed(o.rank);
    if (o.energy > 0.0) trunc = SvdTruncation::energy(o.energy);

    ModelFile file;
    if (o.mode == "hybrid") {
        const TrajectoryDataset coarse = read_trajectory_csv(o.coarse);
        const TrajectoryDataset measured_train =
            train_ids.empty() ? data : data.subset(train_ids);
        const TrajectoryDataset coarse_train =
            train_ids.empty() ? coarse : coarse.subset(train_ids);
        if (o.lambda >= 0.0) {
            ridge.lambda = o.lambda;
            const ResidualDataset residuals = compute_residuals(measured_train, coarse_train);
            const SnapshotSystem sys = assemble_snapshots(residuals.data, {}, spec);
            file.model = fit_ridge(sys, ridge);
        } else {
            file.model =
                fit_hybrid_twin(measured_train, coarse_train, spec, ridge, stab).correction;
        }
        file.coarse_source = fs::path(o.coarse).filename().string();
    } else {
        const SnapshotSystem sys = assemble_snapshots(data, train_ids, spec);
        if (o.mode == "scratch") {
            if (o.lambda >= 0.0) {
                ridge.lambda = o.lambda;
                file.model = fit_ridge(sys, ridge);
            } else {
                file.model = fit_stable(sys, ridge, stab);
            }
        } else {  // dmdc
            file.model = o.lambda >= 0.0 ? fit_dmdc(sys, o.lambda, trunc)
                                         : fit_dmdc_stable(sys, trunc, stab);
            if (o.reduce > 0)
                file.reduced = reduce_model(sys, file.model.lambda, trunc,
                                            SvdTruncation::fixed(o.reduce));
        }
    }

    save_model(file, o.out);

    const FitReport& report = file.model.fit_report;
    Manifest m;
    m.add("command", "fit");
    m.add("version", std::string(kVersion));
    m.add("data", o.data);
    if (!o.coarse.empty()) m.add("coarse", o.coarse);
    m.add("mode", o.mode);
    m.add("features", feature_flags_string(file.model.feature_spec));
    m.add("standardize", file.model.feature_spec.has_standardization());
    m.add("train_flights", o.train_flights.empty() ? "all" : o.train_flights);
    m.add("solver", o.solver);
    m.add("method", o.method);
    m.add("rho_desired", o.rho_desired);
    m.add("lambda", file.model.lambda);
    m.add("rho", file.model.spectral_radius_M);
    m.add("rho_at_lambda_zero", report.rho_at_lambda_zero);
    m.add("lambda_search_iterations", report.lambda_search_iterations);
    m.add("stabilized", report.stabilized);
    m.add("residual_frobenius", report.residual_frobenius);
    if (o.rank > 0) m.add("rank", o.rank);
    if (o.energy > 0.0) m.add("energy", o.energy);
    if (o.reduce > 0) m.add("reduce", o.reduce);
    m.add("out", o.out);
    m.write(o.out + ".manifest");

    std::cout << "fit " << o.mode << ": lambda " << format_double(file.model.lambda) << ", rho "
              << format_double(file.model.spectral_radius_M) << " (unregularized "
              << format_double(report.rho_at_lambda_zero) << "), residual "
              << format_double(report.residual_frobenius) << ", iterations "
              << report.lambda_search_iterations << '\n';
    return 0;
}

// ---------------------------------------------------------------- predict

struct PredictOpts {
    std::string model;
    std::string data;
    std::string coarse;
    std::string out = "pred.csv";
    std::string flight;
    int steps = -1;  // -1: full flight horizon
    int workers = 1;
    bool use_reduced = false;
};

int run_predict(const PredictOpts& o) {
    const ModelFile file = load_model(o.model);
    const TrajectoryDataset data = read_trajectory_csv(o.data);
    if (o.use_reduced && !file.reduced)
        throw CLI::ValidationError("--reduced", "the model file has no reduced block");

    TrajectoryDataset coarse;
    const bool hybrid = !file.coarse_source.empty();
    if (hybrid) {
        if (o.coarse.empty())
            throw CLI::ValidationError(
                "--coarse", "this is a hybrid-twin model (correction of '" + file.coarse_source +
                                "'); pass the coarse trajectories");
        coarse = read_trajectory_csv(o.coarse);
    }

    std::vector<std::string> ids =
        o.flight.empty() ? data.flight_ids() : std::vector<std::string>{o.flight};
    for (const std::string& id : ids)
        if (!data.has_flight(id))
            throw ParseError("predict: flight '" + id + "' not found in " + o.data);

    TrajectoryDataset out;
    out.state_dim = data.state_dim;
    out.control_dim = data.control_dim;
    out.dt = data.dt;
    out.flights.resize(ids.size());

    const auto predict_one = [&](size_t i) {
        const Flight& in = data.flight(ids[i]);
        const int horizon = static_cast<int>(in.states.cols()) - 1;
        const int steps = o.steps < 0 ? horizon : std::min(o.steps, horizon);
        const Vector z0 = in.states.col(0);

        Flight pred;
        pred.id = in.id;
        pred.t0 = in.t0;
        pred.controls = in.controls.leftCols(steps + 1);
        if (hybrid) {
            HybridTwinModel ht;
            ht.correction = file.model;
            ht.coarse_source = file.coarse_source;
            ht.feature_spec = file.model.feature_spec;
            pred.states = predict_hybrid(ht, coarse.flight(in.id), z0, in.controls, steps);
        } else if (o.use_reduced) {
            pred.states = rollout_reduced(*file.reduced, z0, in.controls, steps);
        } else {
            pred.states = rollout(file.model, z0, in.controls, steps);
        }
        out.flights[i] = std::move(pred);
    };

    const int workers = std::max(1, std::min<int>(o.workers, static_cast<int>(ids.size())));
    if (workers == 1) {
        for (size_t i = 0; i < ids.size(); ++i) predict_one(i);
    } else {
        std::vector<std::exception_ptr> errors(ids.size());
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (size_t i = static_cast<size_t>(w); i < ids.size();
                     i += static_cast<size_t>(workers)) {
                    try {
                        predict_one(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
        for (std::thread& t : pool) t.join();
        for (const std::exception_ptr& e : errors)  // first flight in id order wins
            if (e) std::rethrow_exception(e);
    }

    write_trajectory_atomic(out, o.out);

    Manifest m;
    m.add("command", "predict");
    m.add("version", std::string(kVersion));
    m.add("model", o.model);
    m.add("data", o.data);
    if (!o.coarse.empty()) m.add("coarse", o.coarse);
    m.add("flights", o.flight.empty() ? "all" : o.flight);
    m.add("steps", o.steps);
    m.add("workers", o.workers);
    m.add("reduced", o.use_reduced);
    m.add("out", o.out);
    m.write(o.out + ".manifest");

    std::cout << "predicted " << out.flights.size() << " flight(s) to " << o.out << '\n';
    return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateOpts {
    std::string pred;
    std::string truth;
    std::string measured;
    std::string out_dir = ".";
};

int run_evaluate(const EvaluateOpts& o) {
    const TrajectoryDataset pred = read_trajectory_csv(o.pred);
    const TrajectoryDataset truth = read_trajectory_csv(o.truth);
    const Vector ranges = variable_ranges(truth);

    const ErrorReport report = normalized_error(pred, truth, ranges);
    const std::vector<double> mean_signed = per_flight_mean_error(report);
    const std::vector<double> mean_abs = per_flight_mean_abs_error(report);

    double err_max_meas = std::numeric_limits<double>::quiet_NaN();
    double err_max_meas_abs = std::numeric_limits<double>::quiet_NaN();
    MeasurementBound bound;
    if (!o.measured.empty()) {
        const TrajectoryDataset measured = read_trajectory_csv(o.measured);
        bound = measurement_error_bound(measured, truth, ranges);
        err_max_meas = bound_scalar(bound.signed_max, bound.excluded_variables);
        err_max_meas_abs = bound_scalar(bound.abs_max, bound.excluded_variables);
    }

    fs::create_directories(o.out_dir);
    const fs::path dir(o.out_dir);
    write_atomic(dir / "errors.csv", [&](const fs::path& p) { write_error_csv(report, p); });
    write_atomic(dir / "summary.csv", [&](const fs::path& p) {
        write_summary_csv(report, mean_signed, err_max_meas, p);
    });
    write_atomic(dir / "summary_abs.csv", [&](const fs::path& p) {
        write_summary_csv(report, mean_abs, err_max_meas_abs, p, "mean_abs_err",
                          "err_max_meas_abs");
    });
    if (!o.measured.empty())
        write_atomic(dir / "bounds.csv", [&](const fs::path& p) { write_bounds_csv(bound, p); });

    Manifest m;
    m.add("command", "evaluate");
    m.add("version", std::string(kVersion));
    m.add("pred", o.pred);
    m.add("truth", o.truth);
    if (!o.measured.empty()) m.add("measured", o.measured);
    m.add("flights", static_cast<int>(report.flight_ids.size()));
    if (!o.measured.empty()) {
        m.add("err_max_meas", err_max_meas);
        m.add("err_max_meas_abs", err_max_meas_abs);
    }
    m.add("out_dir", o.out_dir);
    m.write(dir / "evaluate.manifest");

    for (size_t f = 0; f < report.flight_ids.size(); ++f)
        std::cout << report.flight_ids[f] << ": mean_err " << format_double(mean_signed[f])
                  << ", mean_abs_err " << format_double(mean_abs[f]) << '\n';
    if (!o.measured.empty())
        std::cout << "err_max_meas " << format_double(err_max_meas) << " (abs "
                  << format_double(err_max_meas_abs) << ")\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stabledmd: stable data-driven models of controlled dynamical systems"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    GenerateOpts g;
    CLI::App* cg = app.add_subcommand("generate", "synthesize a benchmark scenario (gt/cm/ped)");
    cg->add_option("--out-dir", g.out_dir, "output directory");
    cg->add_option("--seed", g.seed, "RNG seed");
    cg->add_option("--flights", g.flights, "number of flights");
    cg->add_option("--state-dim", g.state_dim, "state dimension (>= 4)");
    cg->add_option("--control-dim", g.control_dim, "control dimension");
    cg->add_option("--horizon-min", g.horizon_min, "minimum snapshots per flight");
    cg->add_option("--horizon-max", g.horizon_max, "maximum snapshots per flight");
    cg->add_option("--dt", g.dt, "sampling interval");
    cg->add_option("--noise-fraction", g.noise_fraction,
                   "measurement noise sigma as a fraction of each variable's range");
    cg->add_option("--cm-degradation", g.cm_degradation,
                   "relative parameter error of the coarse model");

    FitOpts f;
    CLI::App* cf = app.add_subcommand("fit", "fit a model from trajectory data");
    cf->add_option("--data", f.data, "training trajectories (CSV)")->required();
    cf->add_option("--coarse", f.coarse, "coarse trajectories (CSV); required for hybrid mode");
    cf->add_option("--out", f.out, "model file to write");
    cf->add_option("--mode", f.mode, "scratch | dmdc | hybrid");
    cf->add_option("--features", f.features, "comma list among z,u,ulag,omega,W");
    cf->add_option("--train-flights", f.train_flights, "comma list of training flight ids");
    cf->add_option("--lambda", f.lambda, "fixed ridge penalty; omit to search for lambda*");
    cf->add_option("--rho-desired", f.rho_desired, "spectral-radius target of the search");
    cf->add_option("--f-tol", f.f_tol, "acceptance band of the search");
    cf->add_option("--method", f.method, "bisection | regula-falsi");
    cf->add_option("--solver", f.solver, "augmented | per-row");
    cf->add_option("--rank", f.rank, "SVD truncation rank of the regressors (dmdc)");
    cf->add_option("--energy", f.energy, "SVD energy fraction in (0,1] (dmdc)");
    cf->add_option("--reduce", f.reduce, "also store a reduced model of this order (dmdc)");
    cf->add_option("--standardize", f.standardize,
                   "1/0; default: on for hybrid mode, off otherwise");
    cf->add_flag("--penalize-control", f.penalize_control,
                 "extend the ridge penalty to the control block");

    PredictOpts p;
    CLI::App* cp = app.add_subcommand("predict", "roll a model out from recorded initial states");
    cp->add_option("--model", p.model, "model file")->required();
    cp->add_option("--data", p.data, "trajectories supplying z0 and controls (CSV)")->required();
    cp->add_option("--coarse", p.coarse, "coarse trajectories (hybrid-twin models)");
    cp->add_option("--out", p.out, "predicted trajectories (CSV)");
    cp->add_option("--flight", p.flight, "predict a single flight id (default: all)");
    cp->add_option("--steps", p.steps, "steps to roll out (default: each flight's horizon)");
    cp->add_option("--workers", p.workers, "worker threads for per-flight fan-out");
    cp->add_flag("--reduced", p.use_reduced, "use the reduced block of the model file");

    EvaluateOpts e;
    CLI::App* ce = app.add_subcommand("evaluate", "normalized errors of predictions vs. reference");
    ce->add_option("--pred", e.pred, "predicted trajectories (CSV)")->required();
    ce->add_option("--truth", e.truth, "reference trajectories (CSV)")->required();
    ce->add_option("--measured", e.measured, "measured trajectories for the noise bound (CSV)");
    ce->add_option("--out-dir", e.out_dir, "directory for errors/summary/bounds CSVs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(cg)) return run_generate(g);
        if (app.got_subcommand(cf)) return run_fit(f);
        if (app.got_subcommand(cp)) return run_predict(p);
        return run_evaluate(e);
    } catch (const CLI::ValidationError& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 2;
    } catch (const ParseError& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 2;
    } catch (const FitError& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 3;
    } catch (const SearchError& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 4;
    } catch (const AlignmentError& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 5;
    } catch (const DivergenceError& ex) {
        std::cerr << "error: " << ex.what() << " (step " << ex.step << ")\n";
        return 6;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 1;
    }
}
