#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "tailqr/data.hpp"
#include "tailqr/io.hpp"

#include <cmath>
#include <fstream>

using namespace tailqr;
using doctest::Approx;

namespace {

// Small FRED-QD style file: metadata rows, then quarterly data.
std::filesystem::path write_panel(const std::filesystem::path& dir, int T, const std::string& extra_cell = "") {
    std::ofstream out(dir / "panel.csv");
    out << "sasdate,GDPC1,A,B,C\n";
    out << "factors,1,1,1,0\n";
    out << "transform,5,1,5,2\n";
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    double gdp = 100.0, b = 50.0, c = 3.0;
    for (int t = 0; t < T; ++t) {
        const Quarter d = Quarter{1960, 1}.shifted(t);
        gdp *= std::exp(0.005 + 0.01 * n(rng));
        b *= std::exp(0.01 * n(rng));
        c += n(rng);
        out << (3 * (d.q - 1) + 1) << "/1/" << d.year << ',' << gdp << ',' << n(rng) << ',' << b << ','
            << (t == 10 && !extra_cell.empty() ? extra_cell : std::to_string(c)) << '\n';
    }
    std::ofstream spec(dir / "spec.json");
    spec << R"([{"name":"GDPC1","tcode":5,"include":true},{"name":"A","tcode":1},{"name":"B","tcode":5},{"name":"C","tcode":2,"include":true}])";
    return dir / "panel.csv";
}

}  // namespace

TEST_CASE("quarter parsing and arithmetic") {
    CHECK(Quarter::parse("1991Q2") == Quarter{1991, 2});
    CHECK(Quarter::parse("1991-04-01") == Quarter{1991, 2});
    CHECK(Quarter::parse("12/1/2020") == Quarter{2020, 4});
    CHECK(Quarter{1991, 2}.shifted(-5) == Quarter{1990, 1});
    CHECK(Quarter{2021, 3}.str() == "2021Q3");
    CHECK(Quarter::from_ordinal(Quarter{1, 1}.ordinal() - 1) == Quarter{0, 4});
    CHECK_THROWS(Quarter::parse("1991Q5"));
    CHECK_THROWS(Quarter::parse("garbage"));
}

TEST_CASE("tcode 1 leaves a series unchanged") {
    const Vector v = (Vector(3) << 1, 2, 3).finished();
    CHECK(apply_tcode(v, 1) == v);
}

TEST_CASE("tcode 5 is a log difference with the first entry consumed") {
    const Vector out = apply_tcode((Vector(2) << 100, 110).finished(), 5);
    CHECK(std::isnan(out[0]));
    CHECK(out[1] == Approx(0.0953101798).epsilon(1e-9));
}

TEST_CASE("second differences and log-based codes consume the right number of rows") {
    const Vector v = (Vector(5) << 1, 4, 9, 16, 25).finished();
    const Vector d2 = apply_tcode(v, 3);
    CHECK(std::isnan(d2[1]));
    CHECK(d2[2] == Approx(2.0));
    CHECK(d2[4] == Approx(2.0));
    CHECK(apply_tcode(v, 4)[2] == Approx(std::log(9.0)));
    const Vector d6 = apply_tcode(v, 6);
    CHECK(std::isnan(d6[1]));
    CHECK(d6[2] == Approx(std::log(9.0) - 2 * std::log(4.0) + std::log(1.0)));
    const Vector d7 = apply_tcode(v, 7);
    CHECK(std::isnan(d7[1]));
    CHECK(d7[2] == Approx((9.0 / 4.0 - 1.0) - (4.0 - 1.0)));
    CHECK_THROWS(apply_tcode((Vector(2) << 1, -1).finished(), 5));
}

TEST_CASE("standardizing a symmetric column") {
    const Matrix X = (Matrix(3, 1) << -1, 0, 1).finished();
    const auto s = Standardizer::fit(X);
    const Matrix Z = s.apply(X);
    CHECK(Z.col(0).mean() == Approx(0.0));
    CHECK(Z(2, 0) == Approx(1.0));
    CHECK(Z(0, 0) == Approx(-1.0));
    CHECK(Z.col(0).squaredNorm() / 2.0 == Approx(1.0));
}

TEST_CASE("load_panel skips metadata rows, transforms and standardizes") {
    const auto dir = oracle::scratch_dir("data_load");
    const auto csv = write_panel(dir, 80);
    const auto panel = load_panel(csv, dir / "spec.json");
    CHECK(panel.rows() == 79);  // one row lost to the log difference
    CHECK(panel.cols() == 3);
    CHECK(panel.dates.front() == Quarter{1960, 2});
    for (Eigen::Index j = 0; j < panel.cols(); ++j) {
        CHECK(panel.X.col(j).mean() == Approx(0.0).epsilon(1e-12));
        const double var = (panel.X.col(j).array() - panel.X.col(j).mean()).square().sum() / (panel.rows() - 1.0);
        CHECK(var == Approx(1.0));
    }
    const auto raw = io::read_csv(csv);
    const double g0 = io::parse_double(raw[3][1]), g1 = io::parse_double(raw[4][1]);
    CHECK(panel.y[0] == Approx(400.0 * std::log(g1 / g0)));
}

TEST_CASE("load_panel errors") {
    const auto dir = oracle::scratch_dir("data_errors");
    const auto csv = write_panel(dir, 80);
    CHECK_THROWS_WITH(load_panel(csv, std::vector<SeriesSpec>{{"GDPC1", 5, true}, {"ZZZ", 1, true}}),
                      doctest::Contains("unknown series"));
    CHECK_THROWS_WITH(load_panel(csv, std::vector<SeriesSpec>{{"GDPC1", 5, true}, {"A", 8, true}}), doctest::Contains("tcode"));
    CHECK_THROWS_WITH(load_panel(write_panel(dir, 80, "oops"), dir / "spec.json"), doctest::Contains("non-numeric"));
    CHECK_THROWS_WITH(load_panel(write_panel(dir, 30), dir / "spec.json"), doctest::Contains("usable rows"));
}

TEST_CASE("standardized panel round trip is bit-identical") {
    const auto dir = oracle::scratch_dir("data_roundtrip");
    const auto panel = load_panel(write_panel(dir, 60), dir / "spec.json");
    write_panel_csv(panel, dir / "std.csv");
    const auto back = read_panel_csv(dir / "std.csv");
    CHECK(back.dates == panel.dates);
    CHECK(back.y == panel.y);
    CHECK(back.X == panel.X);
    write_panel_csv(back, dir / "std2.csv");
    CHECK(io::read_file(dir / "std.csv") == io::read_file(dir / "std2.csv"));
}

TEST_CASE("direct design alignment") {
    const Matrix X = (Matrix(3, 1) << 10, 20, 30).finished();
    const Vector y = (Vector(3) << 1, 2, 3).finished();
    const std::vector<Quarter> dates{{2000, 1}, {2000, 2}, {2000, 3}};
    const auto d = build_direct_design(X, y, dates, 1);
    CHECK(d.F.rows() == 2);
    CHECK(d.F(0, 0) == 10);
    CHECK(d.F(1, 0) == 20);
    CHECK(d.F(0, 1) == 1);  // lagged target
    CHECK(d.y_h == (Vector(2) << 2, 3).finished());
    CHECK(d.dates.front() == Quarter{2000, 2});
    CHECK(d.f_last == (Vector(2) << 30, 3).finished());
    CHECK_THROWS(build_direct_design(X, y, dates, 3));
    CHECK_THROWS(build_direct_design(X, y, dates, 0));
}

TEST_CASE("h = 4 leaves T - 4 rows and K = 0 still carries the lagged target") {
    std::mt19937_64 rng(1);
    const Matrix X = oracle::gaussian_matrix(20, 2, rng);
    const Vector y = oracle::gaussian_matrix(20, 1, rng).col(0);
    std::vector<Quarter> dates;
    for (int t = 0; t < 20; ++t) dates.push_back(Quarter{1990, 1}.shifted(t));
    CHECK(build_direct_design(X, y, dates, 4).F.rows() == 16);
    const auto ar = build_direct_design(Matrix(20, 0), y, dates, 1);
    CHECK(ar.K == 1);
    CHECK(ar.F.col(0) == y.head(19));
}

TEST_CASE("no look-ahead: rows of F ignore data after t - h") {
    std::mt19937_64 rng(2);
    Matrix X = oracle::gaussian_matrix(30, 3, rng);
    Vector y = oracle::gaussian_matrix(30, 1, rng).col(0);
    std::vector<Quarter> dates;
    for (int t = 0; t < 30; ++t) dates.push_back(Quarter{1990, 1}.shifted(t));
    const int h = 4;
    const auto base = build_direct_design(X, y, dates, h);
    for (Eigen::Index row = 0; row < base.F.rows(); ++row) {
        // row pairs target date index row + h with regressors at index row
        Matrix X2 = X;
        Vector y2 = y;
        X2.bottomRows(30 - row - 1).setConstant(99.0);
        y2.tail(30 - row - 1).setConstant(-99.0);
        const auto moved = build_direct_design(X2, y2, dates, h);
        CHECK(moved.F.row(row) == base.F.row(row));
    }
}

TEST_CASE("bundled synthetic panel loads") {
    const auto dir = oracle::source_dir() / "data";
    const auto panel = load_panel(dir / "synthetic_fredqd.csv", dir / "synthetic_fredqd_spec.json");
    CHECK(panel.cols() == 19);
    CHECK(panel.dates.back() == Quarter{2021, 3});
    CHECK(panel.index_of(Quarter{1991, 2}) > 100);
}
