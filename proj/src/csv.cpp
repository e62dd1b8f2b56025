#include "stabledmd/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

namespace stabledmd {

std::string format_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& token) {
    double value = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc() || res.ptr != last)
        throw ParseError("malformed numeric field '" + token + "'");
    return value;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, ',')) fields.push_back(cur);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

}  // namespace

TrajectoryDataset read_trajectory_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path.string() + "'");

    std::string line;
    if (!std::getline(in, line)) throw ParseError("'" + path.string() + "': empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const auto header = split_line(line);
    if (header.size() < 3 || header[0] != "t" || header[1] != "flight")
        throw ParseError("'" + path.string() + "': header must start with t,flight,z1,...");
    int D = 0;
    std::size_t col = 2;
    while (col < header.size() && header[col] == "z" + std::to_string(D + 1)) {
        ++D;
        ++col;
    }
    int d = 0;
    while (col < header.size() && header[col] == "u" + std::to_string(d + 1)) {
        ++d;
        ++col;
    }
    if (D == 0 || col != header.size())
        throw ParseError("'" + path.string() + "': unrecognized header columns");

    struct RawFlight {
        std::vector<double> t;
        std::vector<double> values;  // (D+d) per row
    };
    std::vector<std::string> order;
    std::vector<RawFlight> raw;
    auto flight_index = [&](const std::string& id) -> std::size_t {
        for (std::size_t i = 0; i < order.size(); ++i)
            if (order[i] == id) return i;
        order.push_back(id);
        raw.emplace_back();
        return order.size() - 1;
    };

    std::string last_id;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_line(line);
        if (fields.size() != std::size_t(2 + D + d))
            throw ParseError("'" + path.string() + "' line " + std::to_string(line_no) +
                             ": expected " + std::to_string(2 + D + d) + " fields");
        const std::string& id = fields[1];
        if (id != last_id && std::find(order.begin(), order.end(), id) != order.end())
            throw ParseError("'" + path.string() + "' line " + std::to_string(line_no) +
                             ": rows of flight '" + id + "' are not contiguous");
        last_id = id;
        RawFlight& rf = raw[flight_index(id)];
        rf.t.push_back(parse_double(fields[0]));
        for (int k = 0; k < D + d; ++k) rf.values.push_back(parse_double(fields[2 + k]));
    }
    if (order.empty()) throw ParseError("'" + path.string() + "': no data rows");

    // Sampling interval from the first flight; every step must match it.
    double dt = 0.0;
    for (const RawFlight& rf : raw)
        if (rf.t.size() >= 2) {
            dt = rf.t[1] - rf.t[0];
            break;
        }
    if (dt <= 0.0) throw ParseError("'" + path.string() + "': cannot determine a positive dt");

    TrajectoryDataset ds;
    ds.state_dim = D;
    ds.control_dim = d;
    ds.dt = dt;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const RawFlight& rf = raw[i];
        const int n = static_cast<int>(rf.t.size());
        if (n < 2)
            throw ParseError("'" + path.string() + "': flight '" + order[i] +
                             "' has fewer than 2 rows");
        for (int k = 1; k < n; ++k) {
            const double step = rf.t[k] - rf.t[k - 1];
            if (std::abs(step - dt) > 1e-6 * std::abs(dt))
                throw ParseError("'" + path.string() + "': flight '" + order[i] +
                                 "' is not uniformly sampled at dt=" + format_double(dt));
        }
        Flight f;
        f.id = order[i];
        f.t0 = rf.t[0];
        f.states.resize(D, n);
        f.controls.resize(d, n);
        for (int k = 0; k < n; ++k) {
            for (int v = 0; v < D; ++v) f.states(v, k) = rf.values[std::size_t(k) * (D + d) + v];
            for (int v = 0; v < d; ++v)
                f.controls(v, k) = rf.values[std::size_t(k) * (D + d) + D + v];
        }
        ds.flights.push_back(std::move(f));
    }
    ds.validate();
    return ds;
}

void write_trajectory_csv(const TrajectoryDataset& dataset, const std::filesystem::path& path) {
    dataset.validate();
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ParseError("cannot write '" + path.string() + "'");

    out << "t,flight";
    for (int v = 0; v < dataset.state_dim; ++v) out << ",z" << (v + 1);
    for (int v = 0; v < dataset.control_dim; ++v) out << ",u" << (v + 1);
    out << "\n";

    std::vector<const Flight*> ordered;
    ordered.reserve(dataset.flights.size());
    for (const Flight& f : dataset.flights) ordered.push_back(&f);
    std::sort(ordered.begin(), ordered.end(),
              [](const Flight* a, const Flight* b) { return a->id < b->id; });

    for (const Flight* f : ordered) {
        for (int k = 0; k < f->n_snapshots(); ++k) {
            out << format_double(f->t0 + k * dataset.dt) << ',' << f->id;
            for (int v = 0; v < dataset.state_dim; ++v) out << ',' << format_double(f->states(v, k));
            for (int v = 0; v < dataset.control_dim; ++v)
                out << ',' << format_double(f->controls(v, k));
            out << "\n";
        }
    }
    if (!out) throw ParseError("write failed for '" + path.string() + "'");
}

}  // namespace stabledmd
