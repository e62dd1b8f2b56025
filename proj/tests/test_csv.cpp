#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "stabledmd/csv.hpp"
#include "test_util.hpp"

using namespace stabledmd;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "stabledmd_csv_tests";
    fs::create_directories(dir);
    return dir / name;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::trunc);
    out << text;
}

}  // namespace

TEST_CASE("format_double is shortest-exact and locale independent") {
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(-3.0) == "-3");
    CHECK(format_double(0.1) == "0.1");
    for (double v : {0.1, 1.0 / 3.0, 6.02214076e23, -1.7976931348623157e308, 5e-324, 0.0}) {
        CHECK(parse_double(format_double(v)) == v);
    }
}

TEST_CASE("parse_double rejects malformed fields") {
    CHECK_THROWS_AS(parse_double("1.2.3"), ParseError);
    CHECK_THROWS_AS(parse_double("abc"), ParseError);
    CHECK_THROWS_AS(parse_double(""), ParseError);
    CHECK_THROWS_AS(parse_double("1,5"), ParseError);
}

TEST_CASE("trajectory CSV round trip preserves every value exactly") {
    std::mt19937_64 gen(7);
    Matrix M = testutil::random_with_radius(4, 0.8, gen);
    Matrix N = testutil::random_matrix(4, 2, gen);
    TrajectoryDataset ds = testutil::linear_dataset(M, N, 3, 12, 0.25, 99);
    ds.flights[1].t0 = 3.5;

    const fs::path p = temp_file("roundtrip.csv");
    write_trajectory_csv(ds, p);
    TrajectoryDataset back = read_trajectory_csv(p);

    CHECK(back.state_dim == 4);
    CHECK(back.control_dim == 2);
    CHECK(back.dt == 0.25);
    REQUIRE(back.flights.size() == ds.flights.size());
    for (const Flight& f : ds.flights) {
        const Flight& g = back.flight(f.id);
        CHECK((f.states - g.states).norm() == 0.0);
        CHECK((f.controls - g.controls).norm() == 0.0);
        CHECK(f.t0 == g.t0);
    }
}

TEST_CASE("written files carry the documented header and flight-sorted rows") {
    std::mt19937_64 gen(8);
    Matrix M = testutil::random_with_radius(2, 0.5, gen);
    Matrix N = testutil::random_matrix(2, 1, gen);
    TrajectoryDataset ds = testutil::linear_dataset(M, N, 2, 3, 1.0, 1);
    std::swap(ds.flights[0], ds.flights[1]);  // writer must sort by id anyway

    const fs::path p = temp_file("header.csv");
    write_trajectory_csv(ds, p);

    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    CHECK(line == "t,flight,z1,z2,u1");
    std::vector<std::string> ids;
    while (std::getline(in, line)) {
        const auto a = line.find(','), b = line.find(',', a + 1);
        ids.push_back(line.substr(a + 1, b - a - 1));
    }
    CHECK(std::is_sorted(ids.begin(), ids.end()));
}

TEST_CASE("non-uniform timestamps are rejected, not resampled") {
    const fs::path p = temp_file("nonuniform.csv");
    write_text(p,
               "t,flight,z1\n"
               "0,a,1\n"
               "1,a,2\n"
               "2.5,a,3\n");
    CHECK_THROWS_AS(read_trajectory_csv(p), ParseError);
}

TEST_CASE("uniform timestamps within 1e-6 relative tolerance are accepted") {
    const fs::path p = temp_file("nearuniform.csv");
    write_text(p,
               "t,flight,z1\n"
               "0,a,1\n"
               "1,a,2\n"
               "2.0000001,a,3\n");
    CHECK_NOTHROW(read_trajectory_csv(p));
}

TEST_CASE("malformed inputs raise ParseError") {
    const fs::path p = temp_file("bad.csv");
    SUBCASE("missing file") { CHECK_THROWS_AS(read_trajectory_csv(temp_file("nope.csv")), ParseError); }
    SUBCASE("bad header") {
        write_text(p, "time,flight,z1\n0,a,1\n1,a,2\n");
        CHECK_THROWS_AS(read_trajectory_csv(p), ParseError);
    }
    SUBCASE("field count mismatch") {
        write_text(p, "t,flight,z1,u1\n0,a,1\n1,a,2\n");
        CHECK_THROWS_AS(read_trajectory_csv(p), ParseError);
    }
    SUBCASE("non-contiguous flight rows") {
        write_text(p, "t,flight,z1\n0,a,1\n0,b,1\n1,a,2\n1,b,2\n");
        CHECK_THROWS_AS(read_trajectory_csv(p), ParseError);
    }
    SUBCASE("single-row flight") {
        write_text(p, "t,flight,z1\n0,a,1\n0,b,1\n1,b,2\n");
        CHECK_THROWS_AS(read_trajectory_csv(p), ParseError);
    }
    SUBCASE("numeric garbage") {
        write_text(p, "t,flight,z1\n0,a,1\n1,a,x\n");
        CHECK_THROWS_AS(read_trajectory_csv(p), ParseError);
    }
}

TEST_CASE("datasets without controls read back with zero control rows") {
    const fs::path p = temp_file("nocontrols.csv");
    write_text(p,
               "t,flight,z1,z2\n"
               "0,a,1,2\n"
               "0.5,a,3,4\n");
    TrajectoryDataset ds = read_trajectory_csv(p);
    CHECK(ds.control_dim == 0);
    CHECK(ds.flights[0].controls.rows() == 0);
    CHECK(ds.flights[0].controls.cols() == 2);
    CHECK(ds.dt == 0.5);
}
