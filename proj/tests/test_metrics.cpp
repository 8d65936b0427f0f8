#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tailqr/metrics.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <random>

using namespace tailqr;
using doctest::Approx;

namespace {

QuantilePathForecast path(const std::string& id, Quarter origin, int h, std::vector<double> quantiles, double realized) {
    QuantilePathForecast p;
    p.origin = origin;
    p.horizon = h;
    p.model_id = id;
    p.q = default_quantile_grid();
    p.quantiles = std::move(quantiles);
    p.realized = realized;
    p.ok.assign(p.q.size(), true);
    p.iterations.assign(p.q.size(), 1);
    p.converged.assign(p.q.size(), true);
    return p;
}

std::vector<double> shifted_grid(double centre, double spread) {
    std::vector<double> out;
    for (double q : default_quantile_grid()) out.push_back(centre + spread * (q - 0.5));
    return out;
}

// Panel of paths for two models over consecutive origins.
std::vector<QuantilePathForecast> two_models(int n, double spread_a, double spread_b, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<QuantilePathForecast> out;
    for (int i = 0; i < n; ++i) {
        const Quarter o = Quarter{2000, 1}.shifted(i);
        const double y = nd(rng);
        out.push_back(path("bench", o, 1, shifted_grid(0.0, spread_b), y));
        out.push_back(path("alt", o, 1, shifted_grid(0.1, spread_a), y));
    }
    return out;
}

}  // namespace

TEST_CASE("quantile score examples") {
    CHECK(quantile_score(1.0, 0.1, 0.5) == Approx(0.45));
    CHECK(quantile_score(2.0, 2.0, 0.9) == 0.0);
    CHECK(quantile_score(-1.0, 0.0, 0.05) == Approx(0.95));
    CHECK(quantile_score(1.0, 0.0, 0.05) == Approx(0.05));
}

TEST_CASE("weights") {
    CHECK(crps_weight(CrpsWeight::Uniform, 0.3) == 1.0);
    CHECK(crps_weight(CrpsWeight::Tails, 0.5) == 0.0);
    CHECK(crps_weight(CrpsWeight::Tails, 0.05) == Approx(0.81));
    CHECK(crps_weight(CrpsWeight::Left, 0.25) == Approx(0.5625));
    CHECK(crps_weight(CrpsWeight::Right, 0.25) == Approx(0.0625));
    CHECK(weight_metric_name(CrpsWeight::Right) == "CRPS-r");
    // left + right weights span the tails weight: (1-z)^2 + z^2 = (1 + (2z-1)^2) / 2
    for (double z : default_quantile_grid())
        CHECK(crps_weight(CrpsWeight::Left, z) + crps_weight(CrpsWeight::Right, z) ==
              Approx(0.5 * (1.0 + crps_weight(CrpsWeight::Tails, z))));
}

TEST_CASE("uniform CRPS is twice the mean quantile score") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd(0.0, 1.0);
    const auto grid = default_quantile_grid();
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> Q;
        for (std::size_t j = 0; j < grid.size(); ++j) Q.push_back(nd(rng));
        const double y = nd(rng);
        double s = 0.0;
        for (std::size_t j = 0; j < grid.size(); ++j) s += quantile_score(y, Q[j], grid[j]);
        CHECK(qw_crps(grid, Q, y, CrpsWeight::Uniform) == Approx(2.0 * s / 19.0).epsilon(1e-14));
        CHECK(qw_crps(grid, Q, y, CrpsWeight::Tails) >= 0.0);
    }
}

TEST_CASE("CRPS rejects incomplete grids") {
    auto grid = default_quantile_grid();
    std::vector<double> Q(grid.size(), 0.0);
    CHECK_THROWS(qw_crps(std::vector<double>(grid.begin(), grid.end() - 1), std::vector<double>(18, 0.0), 0.0, CrpsWeight::Uniform));
    CHECK_THROWS(qw_crps(grid, std::vector<double>(18, 0.0), 0.0, CrpsWeight::Uniform));
    CHECK_THROWS(qw_crps(grid, Q, std::nan(""), CrpsWeight::Uniform));
    Q[3] = std::nan("");
    CHECK_THROWS(qw_crps(grid, Q, 0.0, CrpsWeight::Uniform));
    grid[2] = 0.16;
    CHECK_THROWS(qw_crps(grid, std::vector<double>(19, 0.0), 0.0, CrpsWeight::Uniform));
}

TEST_CASE("DM statistic against a hand computation") {
    const std::vector<double> a{1.2, 0.8, 1.5, 0.9, 1.1, 2.0, 0.7, 1.3, 1.0, 0.6, 1.4, 1.8};
    const std::vector<double> b{1.0, 0.9, 1.1, 1.0, 0.8, 1.5, 0.9, 1.0, 1.2, 0.5, 1.0, 1.1};
    for (int h : {1, 2, 3}) {
        const std::size_t n = a.size();
        std::vector<double> d(n);
        double mean = 0.0;
        for (std::size_t t = 0; t < n; ++t) mean += (d[t] = a[t] - b[t]) / n;
        auto gamma = [&](std::size_t k) {
            double s = 0.0;
            for (std::size_t t = k; t < n; ++t) s += (d[t] - mean) * (d[t - k] - mean);
            return s / n;
        };
        double var = gamma(0);
        for (int k = 1; k < h; ++k) var += 2.0 * gamma(static_cast<std::size_t>(k));
        const double dn = static_cast<double>(n);
        const double stat = mean / std::sqrt(var / dn) * std::sqrt((dn + 1.0 - 2.0 * h + h * (h - 1.0) / dn) / dn);
        const boost::math::students_t t(dn - 1.0);
        const double p = 2.0 * (1.0 - boost::math::cdf(t, std::abs(stat)));
        const auto r = dm_test(a, b, h);
        CAPTURE(h);
        CHECK(r.statistic == Approx(stat).epsilon(1e-10));
        CHECK(r.p_value == Approx(p).epsilon(1e-10));
        CHECK(r.n == 12);
        CHECK_FALSE(r.degenerate);
    }
}

TEST_CASE("DM antisymmetry and degenerate cases") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> a(30), b(30);
    for (std::size_t t = 0; t < 30; ++t) {
        a[t] = nd(rng);
        b[t] = nd(rng);
    }
    const auto ab = dm_test(a, b, 4), ba = dm_test(b, a, 4);
    CHECK(ab.statistic == Approx(-ba.statistic));
    CHECK(ab.p_value == Approx(ba.p_value));
    const auto same = dm_test(a, a, 1);
    CHECK(same.degenerate);
    CHECK(same.statistic == 0.0);
    CHECK(same.p_value == 1.0);
    // quarter-integer losses keep the gap exactly constant
    std::vector<double> e(30), c(30);
    for (std::size_t t = 0; t < 30; ++t) {
        e[t] = std::round(4.0 * a[t]) / 4.0;
        c[t] = e[t] + 1.0;
    }
    const auto constant_gap = dm_test(c, e, 1);
    CHECK(constant_gap.degenerate);
    CHECK(std::isnan(constant_gap.statistic));
    CHECK_THROWS(dm_test(std::vector<double>(9, 0.0), std::vector<double>(9, 1.0), 1));
    CHECK_THROWS(dm_test(a, std::vector<double>(29, 0.0), 1));
}

TEST_CASE("DM falls back to the lag-0 variance") {
    // alternating differential: strongly negative lag-1 autocovariance
    std::vector<double> a(20), b(20, 0.0);
    for (std::size_t t = 0; t < 20; ++t) a[t] = (t % 2 ? 1.0 : -1.0) + 0.01 * static_cast<double>(t % 3);
    const auto r = dm_test(a, b, 2);
    CHECK(r.hac_fallback);
    CHECK(std::isfinite(r.statistic));
}

TEST_CASE("window parsing") {
    const auto w = parse_window("2006Q2:2021Q3");
    CHECK(w.contains(Quarter{2006, 2}));
    CHECK(w.contains(Quarter{2021, 3}));
    CHECK_FALSE(w.contains(Quarter{2006, 1}));
    CHECK_FALSE(w.contains(Quarter{2021, 4}));
    CHECK(parse_window(":2000Q1").contains(Quarter{1950, 1}));
    CHECK_THROWS(parse_window("2006Q2"));
    CHECK_THROWS(parse_window("2010Q1:2006Q2"));
}

TEST_CASE("benchmark scores relative one against itself") {
    const auto paths = two_models(30, 1.0, 2.0, 3);
    const auto r = score_report(paths, "bench");
    REQUIRE(r.rows.size() == 2 * (4 + 19));
    for (const auto& row : r.rows) {
        if (row.model_id != "bench") continue;
        CHECK(row.relative == 1.0);
        CHECK(row.dm.degenerate);
        CHECK(row.n == 30);
    }
    CHECK(r.rows.front().metric == "CRPS");
    CHECK(r.rows[4].metric == "QS(0.05)");
    CHECK(r.rows[22].metric == "QS(0.95)");
}

TEST_CASE("relative score is the ratio of summed losses") {
    auto paths = two_models(25, 1.0, 2.0, 4);
    // scale the alternative's errors: a path identical to the benchmark but
    // with the realization moved keeps ratios easy to predict
    std::vector<QuantilePathForecast> scaled;
    for (const auto& p : paths) {
        if (p.model_id != "bench") continue;
        auto alt = p;
        alt.model_id = "alt";
        // quantiles pulled 10% toward the realization reduce every score by 10%
        for (auto& v : alt.quantiles) v = p.realized + 0.9 * (v - p.realized);
        scaled.push_back(p);
        scaled.push_back(alt);
    }
    const auto r = score_report(scaled, "bench");
    for (const auto& row : r.rows)
        if (row.model_id == "alt") CHECK(row.relative == Approx(0.9).epsilon(1e-12));
    // cumulative ratio ends at the overall relative score
    double last = 0.0;
    for (const auto& c : r.cumulative)
        if (c.model_id == "alt" && c.metric == "CRPS") last = c.cumulative_ratio;
    CHECK(last == Approx(0.9));
}

TEST_CASE("a window covering everything changes nothing") {
    const auto paths = two_models(20, 1.5, 1.0, 5);
    const auto all = score_report(paths, "bench");
    const auto win = score_report(paths, "bench", parse_window("1990Q1:2030Q4"));
    CHECK(score_table_csv(all) == score_table_csv(win));
    const auto part = score_report(paths, "bench", parse_window("2001Q1:"));
    CHECK(part.rows.front().n == 20 - 3);
    CHECK_THROWS(score_report(paths, "missing"));
    CHECK_THROWS(score_report(paths, "bench", parse_window("2050Q1:2051Q1")));
}

TEST_CASE("incomplete paths are skipped") {
    auto paths = two_models(15, 1.0, 1.0, 6);
    paths[1].ok[4] = false;
    paths[1].quantiles[4] = std::nan("");
    paths[3].realized = std::nan("");
    const auto r = score_report(paths, "bench");
    CHECK(r.skipped_paths == 2);
    for (const auto& row : r.rows)
        if (row.model_id == "alt") CHECK(row.n == 13);
}

TEST_CASE("table renderers") {
    const auto r = score_report(two_models(12, 1.0, 2.0, 7), "bench");
    const auto csv = score_table_csv(r);
    CHECK(csv.rfind("model_id,horizon,metric,mean_score,relative,dm_stat,dm_pvalue,dm_flag,n,first_target,last_target\n", 0) == 0);
    const auto text = score_table_text(r);
    CHECK(text.find("relative to bench") != std::string::npos);
    CHECK(text.find("CRPS-t") != std::string::npos);
    CHECK(cumulative_csv(r).rfind("date,horizon,model_id,metric,cumulative_ratio\n", 0) == 0);
}
