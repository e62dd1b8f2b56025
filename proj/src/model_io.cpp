#include "stabledmd/model_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "stabledmd/csv.hpp"
#include "stabledmd/errors.hpp"

namespace stabledmd {

namespace {

constexpr const char* kMagic = "stabledmd-model";
constexpr int kFormatVersion = 1;

// 17 significant digits: enough to reproduce any double exactly on load.
std::string fmt17(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::scientific, 16);
    return std::string(buf, res.ptr);
}

std::string feature_flags(const FeatureSpec& spec) {
    std::string s;
    const auto add = [&](const char* name) {
        if (!s.empty()) s += ',';
        s += name;
    };
    if (spec.include_control) add("u");
    if (spec.include_lagged_control) add("ulag");
    if (spec.include_omega) add("omega");
    if (spec.include_W) add("W");
    return s.empty() ? "none" : s;
}

FeatureSpec parse_feature_flags(const std::string& s) {
    FeatureSpec spec;
    spec.include_control = false;
    if (s == "none") return spec;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "u")
            spec.include_control = true;
        else if (item == "ulag")
            spec.include_lagged_control = true;
        else if (item == "omega")
            spec.include_omega = true;
        else if (item == "W")
            spec.include_W = true;
        else
            throw ParseError("model file: unknown feature flag '" + item + "'");
    }
    return spec;
}

void write_matrix(std::ostream& out, const char* name, const Matrix& m) {
    out << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j > 0) out << ' ';
            out << fmt17(m(i, j));
        }
        out << '\n';
    }
}

void write_vector(std::ostream& out, const char* name, const Vector& v) {
    out << "vector " << name << ' ' << v.size() << '\n';
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i > 0) out << ' ';
        out << fmt17(v(i));
    }
    if (v.size() > 0) out << '\n';
}

struct Reader {
    std::istream& in;

    std::string next() {
        std::string tok;
        if (!(in >> tok)) throw ParseError("model file: unexpected end of input");
        return tok;
    }
    void expect(const std::string& keyword) {
        const std::string tok = next();
        if (tok != keyword)
            throw ParseError("model file: expected '" + keyword + "', found '" + tok + "'");
    }
    double num() { return parse_double(next()); }
    int integer() {
        const std::string tok = next();
        int value = 0;
        const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
        if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
            throw ParseError("model file: expected an integer, found '" + tok + "'");
        return value;
    }
    bool flag() {
        const int v = integer();
        if (v != 0 && v != 1) throw ParseError("model file: expected 0 or 1");
        return v == 1;
    }
    Matrix matrix(const std::string& name) {
        expect("matrix");
        expect(name);
        const int rows = integer();
        const int cols = integer();
        if (rows < 0 || cols < 0) throw ParseError("model file: negative matrix dimension");
        Matrix m(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) m(i, j) = num();
        return m;
    }
    Vector vec(const std::string& name) {
        expect("vector");
        expect(name);
        const int size = integer();
        if (size < 0) throw ParseError("model file: negative vector size");
        Vector v(size);
        for (int i = 0; i < size; ++i) v(i) = num();
        return v;
    }
};

}  // namespace

void save_model(const ModelFile& file, const std::filesystem::path& path) {
    const ControlledLinearModel& model = file.model;
    std::ostringstream out;
    out << kMagic << ' ' << kFormatVersion << '\n';
    out << "version " << kVersion << '\n';
    out << "state_dim " << model.state_dim() << '\n';
    out << "control_dim " << model.raw_control_dim << '\n';
    out << "dt " << fmt17(model.dt) << '\n';
    out << "features " << feature_flags(model.feature_spec) << '\n';
    out << "standardize " << (model.feature_spec.has_standardization() ? 1 : 0) << '\n';
    out << "lambda " << fmt17(model.lambda) << '\n';
    out << "spectral_radius " << fmt17(model.spectral_radius_M) << '\n';
    out << "residual_frobenius " << fmt17(model.fit_report.residual_frobenius) << '\n';
    out << "rho_at_lambda_zero " << fmt17(model.fit_report.rho_at_lambda_zero) << '\n';
    out << "lambda_search_iterations " << model.fit_report.lambda_search_iterations << '\n';
    out << "stabilized " << (model.fit_report.stabilized ? 1 : 0) << '\n';
    out << "coarse_source " << (file.coarse_source.empty() ? "-" : file.coarse_source) << '\n';
    write_matrix(out, "M", model.M);
    write_matrix(out, "N", model.N);
    if (model.feature_spec.has_standardization()) {
        write_vector(out, "state_shift", model.feature_spec.state_shift);
        write_vector(out, "state_scale", model.feature_spec.state_scale);
    }
    if (file.reduced) {
        const ReducedControlledModel& rom = *file.reduced;
        out << "reduced 1\n";
        out << "r " << rom.r << '\n';
        out << "r_tilde " << rom.r_tilde << '\n';
        out << "reduced_lambda " << fmt17(rom.lambda) << '\n';
        write_matrix(out, "M_hat", rom.M_hat);
        write_matrix(out, "N_hat", rom.N_hat);
        write_matrix(out, "Xi", rom.Xi);
    } else {
        out << "reduced 0\n";
    }
    out << "end\n";

    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
        f << out.str();
        if (!f) throw std::runtime_error("failed writing '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

ModelFile load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open model file '" + path.string() + "'");
    Reader r{in};

    r.expect(kMagic);
    const int format = r.integer();
    if (format != kFormatVersion)
        throw ParseError("model file: unsupported format version " + std::to_string(format));
    r.expect("version");
    r.next();  // library version, informational

    ModelFile file;
    ControlledLinearModel& model = file.model;
    r.expect("state_dim");
    const int D = r.integer();
    r.expect("control_dim");
    model.raw_control_dim = r.integer();
    r.expect("dt");
    model.dt = r.num();
    r.expect("features");
    model.feature_spec = parse_feature_flags(r.next());
    r.expect("standardize");
    const bool standardized = r.flag();
    r.expect("lambda");
    model.lambda = r.num();
    r.expect("spectral_radius");
    model.spectral_radius_M = r.num();
    r.expect("residual_frobenius");
    model.fit_report.residual_frobenius = r.num();
    r.expect("rho_at_lambda_zero");
    model.fit_report.rho_at_lambda_zero = r.num();
    r.expect("lambda_search_iterations");
    model.fit_report.lambda_search_iterations = r.integer();
    r.expect("stabilized");
    model.fit_report.stabilized = r.flag();
    r.expect("coarse_source");
    const std::string source = r.next();
    file.coarse_source = source == "-" ? std::string() : source;

    model.M = r.matrix("M");
    model.N = r.matrix("N");
    if (model.M.rows() != D || model.M.cols() != D)
        throw ParseError("model file: M does not match the declared state dimension");
    const int dp = d_prime(model.feature_spec, model.raw_control_dim);
    if (model.N.rows() != D || model.N.cols() != dp)
        throw ParseError("model file: N does not match the declared feature dimension");
    if (standardized) {
        model.feature_spec.standardize = true;
        model.feature_spec.state_shift = r.vec("state_shift");
        model.feature_spec.state_scale = r.vec("state_scale");
        if (model.feature_spec.state_shift.size() != D ||
            model.feature_spec.state_scale.size() != D)
            throw ParseError("model file: standardization vectors have wrong length");
    }

    r.expect("reduced");
    if (r.flag()) {
        ReducedControlledModel rom;
        r.expect("r");
        rom.r = r.integer();
        r.expect("r_tilde");
        rom.r_tilde = r.integer();
        r.expect("reduced_lambda");
        rom.lambda = r.num();
        rom.M_hat = r.matrix("M_hat");
        rom.N_hat = r.matrix("N_hat");
        rom.Xi = r.matrix("Xi");
        if (rom.M_hat.rows() != rom.r || rom.M_hat.cols() != rom.r ||
            rom.N_hat.rows() != rom.r || rom.Xi.rows() != D || rom.Xi.cols() != rom.r)
            throw ParseError("model file: reduced blocks are inconsistent");
        rom.feature_spec = model.feature_spec;
        rom.dt = model.dt;
        rom.raw_control_dim = model.raw_control_dim;
        file.reduced = std::move(rom);
    }
    r.expect("end");
    return file;
}

}  // namespace stabledmd
