#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "tailqr/forecast.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <random>

using namespace tailqr;
using doctest::Approx;

namespace {

Panel toy_panel(Eigen::Index T, Eigen::Index K, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Panel p;
    p.target_name = "Y";
    p.X_raw = oracle::gaussian_matrix(T, K, rng);
    p.y.resize(T);
    std::normal_distribution<double> n(0.0, 1.0);
    p.y[0] = 0.0;
    for (Eigen::Index t = 1; t < T; ++t) p.y[t] = 0.4 * p.y[t - 1] + 0.5 * p.X_raw(t - 1, 0) + n(rng);
    for (Eigen::Index t = 0; t < T; ++t) p.dates.push_back(Quarter{1990, 1}.shifted(static_cast<int>(t)));
    p.X = Standardizer::fit(p.X_raw).apply(p.X_raw);
    for (Eigen::Index j = 0; j < K; ++j) p.specs.push_back(SeriesSpec{"X" + std::to_string(j), 1, true});
    return p;
}

ExperimentConfig small_config(const Panel& p) {
    ExperimentConfig c;
    c.horizons = {1};
    c.models = model_grid({prior::Ridge{}, prior::MinnesotaFixed{}}, {basis::None{}});
    c.holdout_start = p.dates[static_cast<std::size_t>(p.rows() - 3)];
    c.fit.tol = 1e-6;
    c.jobs = 1;
    return c;
}

QuantilePathForecast with_quantiles(std::vector<double> q, std::vector<double> v) {
    QuantilePathForecast p;
    p.q = std::move(q);
    p.quantiles = std::move(v);
    p.ok.assign(p.q.size(), true);
    p.iterations.assign(p.q.size(), 1);
    p.converged.assign(p.q.size(), true);
    return p;
}

}  // namespace

TEST_CASE("grid and model ids") {
    const auto g = default_quantile_grid();
    REQUIRE(g.size() == 19);
    CHECK(g.front() == Approx(0.05));
    CHECK(g[9] == Approx(0.5));
    const auto models = model_grid({prior::Ridge{}, prior::Horseshoe{}}, {basis::None{}, basis::GaussianProcess{}});
    REQUIRE(models.size() == 4);
    CHECK(models[0].id() == "ridge-none");
    CHECK(models[1].id() == "ridge-gp");
    CHECK(models[3].id() == "horseshoe-gp");
}

TEST_CASE("rearrangement") {
    const auto p = rearrange_quantiles(with_quantiles({0.1, 0.5, 0.9}, {1.0, 0.5, 2.0}));
    CHECK(p.quantiles == std::vector<double>{0.5, 1.0, 2.0});
    CHECK(p.crossing_fixed);
    const auto again = rearrange_quantiles(p);
    CHECK(again.quantiles == p.quantiles);
    const auto sorted = rearrange_quantiles(with_quantiles({0.1, 0.5, 0.9}, {-1.0, 0.0, 1.0}));
    CHECK_FALSE(sorted.crossing_fixed);
    auto broken = with_quantiles({0.1, 0.5, 0.9}, {2.0, std::nan(""), 1.0});
    broken.ok[1] = false;
    const auto left = rearrange_quantiles(broken);
    CHECK(left.quantiles[0] == 2.0);
    CHECK_FALSE(left.crossing_fixed);
}

TEST_CASE("warm start order") {
    CHECK(warm_start_order(default_quantile_grid()).front() == 9);
    CHECK(warm_start_order({0.1, 0.3, 0.6, 0.9}) == std::vector<std::size_t>{2, 3, 1, 0});
    CHECK(warm_start_order({}).empty());
}

TEST_CASE("config validation") {
    ExperimentConfig c;
    CHECK_THROWS_WITH(c.validate(), doctest::Contains("model list is empty"));
    c.models = model_grid({prior::Ridge{}}, {basis::None{}});
    CHECK_NOTHROW(c.validate());
    c.models.push_back(c.models.front());
    CHECK_THROWS(c.validate());
    c.models.pop_back();
    c.horizons = {0};
    CHECK_THROWS(c.validate());
    c.horizons = {1};
    c.quantile_grid = {0.5, 0.4};
    CHECK_THROWS(c.validate());
}

TEST_CASE("config json round trip") {
    const nlohmann::json j = {{"priors", {"ridge", "horseshoe"}},
                              {"bases", {"none", "gp"}},
                              {"horizons", {1, 4}},
                              {"holdout_start", "2000Q1"},
                              {"holdout_end", "2005Q4"},
                              {"fit", {{"max_iter", 50}, {"tol", 1e-3}}}};
    const auto c = parse_experiment_config(j);
    CHECK(c.models.size() == 4);
    CHECK(c.holdout_start == Quarter{2000, 1});
    CHECK(c.holdout_end == Quarter{2005, 4});
    CHECK(c.fit.max_iter == 50);
    const auto back = parse_experiment_config(experiment_config_json(c));
    CHECK(experiment_config_json(back) == experiment_config_json(c));
    CHECK_THROWS(parse_experiment_config(nlohmann::json{{"priors", nlohmann::json::array()}}));
}

TEST_CASE("window design layout") {
    const auto p = toy_panel(60, 3, 1);
    const Quarter origin = p.dates[40];
    const auto w = prepare_window(p, origin, 2, basis::None{}, true);
    CHECK(w.split.K == 4);  // three predictors plus the lagged target
    CHECK(w.split.M == 0);
    CHECK(w.y.size() == 41 - 2);
    CHECK(w.dates.back() == origin);
    CHECK(w.own_lag.back());
    CHECK(w.minnesota_scale.size() == 4);
    // standardized on training rows
    for (Eigen::Index j = 0; j < 4; ++j) CHECK(w.X_linear.col(j).mean() == Approx(0.0).scale(1.0));
    const auto g = prepare_window(p, origin, 1, basis::GaussianProcess{}, false);
    CHECK(g.split.M == g.y.size());
    // a training replica maps back to its row of Z
    const Vector replica = evaluate_basis(g.expansion, g.X_linear.row(5).transpose());
    CHECK((replica - g.F.row(5).tail(g.split.M).transpose()).norm() < 1e-8);
    CHECK_THROWS(prepare_window(p, Quarter{2050, 1}, 1, basis::None{}, false));
}

TEST_CASE("experiment produces one path per origin and model") {
    const auto p = toy_panel(50, 2, 2);
    auto c = small_config(p);
    const auto r = run_experiment(p, c);
    CHECK(r.paths.size() == 3 * 2);
    CHECK(r.failures.empty());
    CHECK(r.fits_attempted == 3 * 2 * 19);
    for (const auto& path : r.paths) {
        CHECK(path.complete());
        CHECK(std::is_sorted(path.quantiles.begin(), path.quantiles.end()));
        CHECK(std::isfinite(path.realized));
        CHECK(path.realized == p.y[p.index_of(path.target())]);
    }
    CHECK(r.paths[0].model_id == "ridge-none");
    CHECK(r.paths[1].model_id == "minnesota-none");
    CHECK(r.paths[0].origin < r.paths[2].origin);
}

TEST_CASE("single origin counts") {
    const auto p = toy_panel(45, 2, 3);
    auto c = small_config(p);
    c.holdout_start = p.dates.back();
    c.holdout_end = p.dates.back();
    c.quantile_grid = {0.25, 0.5, 0.75};
    c.models = model_grid({prior::Ridge{}, prior::Horseshoe{}, prior::Lasso{}}, {basis::None{}});
    const auto r = run_experiment(p, c);
    CHECK(r.paths.size() == 3);
    CHECK(r.fits_attempted == 9);
    CHECK(forecast_origins(p, c, 1).size() == 1);
}

TEST_CASE("future data cannot change a forecast") {
    const auto p = toy_panel(60, 2, 4);
    auto c = small_config(p);
    c.holdout_start = p.dates[50];
    c.holdout_end = p.dates[50];
    const auto base = run_experiment(p, c);
    Panel q = p;
    for (Eigen::Index t = 50; t < 60; ++t) {
        q.y[t] += 100.0;
        q.X_raw.row(t).array() -= 50.0;
    }
    q.X = Standardizer::fit(q.X_raw).apply(q.X_raw);
    const auto moved = run_experiment(q, c);
    REQUIRE(base.paths.size() == moved.paths.size());
    for (std::size_t i = 0; i < base.paths.size(); ++i) CHECK(base.paths[i].quantiles == moved.paths[i].quantiles);
    CHECK(base.paths[0].realized != moved.paths[0].realized);
}

TEST_CASE("results do not depend on the worker count") {
    const auto p = toy_panel(50, 2, 5);
    auto c = small_config(p);
    c.horizons = {1, 2};
    const auto one = run_experiment(p, c);
    c.jobs = 3;
    const auto three = run_experiment(p, c);
    CHECK(forecast_store_csv(one.paths) == forecast_store_csv(three.paths));
}

TEST_CASE("forecast store round trip") {
    const auto p = toy_panel(45, 2, 6);
    const auto r = run_experiment(p, small_config(p));
    const auto csv = forecast_store_csv(r.paths);
    CHECK(csv.rfind("origin,horizon,model_id,q,forecast,realized,crossing_fixed,iterations,converged\n", 0) == 0);
    const auto back = parse_forecast_store(csv);
    REQUIRE(back.size() == r.paths.size());
    CHECK(forecast_store_csv(back) == csv);
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].quantiles == r.paths[i].quantiles);
        CHECK(back[i].iterations == r.paths[i].iterations);
    }
    const auto dir = oracle::scratch_dir("forecast");
    std::ofstream(dir / "f.csv") << csv;
    CHECK(read_forecast_store(dir / "f.csv").size() == r.paths.size());
    CHECK(failures_csv({}).rfind("origin,horizon,model_id,q,message\n", 0) == 0);
}

TEST_CASE("direct forecast of a pure intercept series") {
    Panel p = toy_panel(40, 1, 7);
    p.y.setConstant(2.0);
    p.y += 1e-3 * p.X_raw.col(0);
    const auto w = prepare_window(p, p.dates.back(), 1, basis::None{}, false);
    const auto s = fit_window(w, ModelSpec{prior::Ridge{}, basis::None{}}, 0.5, FitOptions{});
    CHECK(w.f_new.dot(s.E_beta) == Approx(2.0).epsilon(1e-2));
}
