#include "tailqr/forecast.hpp"

#include "tailqr/io.hpp"
#include "tailqr/summary.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <functional>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace tailqr {

std::vector<double> default_quantile_grid() {
    std::vector<double> g;
    for (int j = 1; j <= 19; ++j) g.push_back(j / 20.0);
    return g;
}

std::string ModelSpec::id() const { return prior_name(prior) + "-" + basis_name(basis); }

std::vector<ModelSpec> model_grid(const std::vector<PriorFamily>& priors, const std::vector<BasisKind>& bases) {
    std::vector<ModelSpec> out;
    for (const auto& p : priors)
        for (const auto& b : bases) out.push_back(ModelSpec{p, b});
    return out;
}

void ExperimentConfig::validate() const {
    if (quantile_grid.empty()) throw std::invalid_argument("quantile_grid is empty");
    for (std::size_t i = 0; i < quantile_grid.size(); ++i) {
        if (!(quantile_grid[i] > 0.0 && quantile_grid[i] < 1.0)) throw std::invalid_argument("quantile_grid entries must lie in (0, 1)");
        if (i > 0 && !(quantile_grid[i] > quantile_grid[i - 1])) throw std::invalid_argument("quantile_grid must be strictly increasing");
    }
    if (horizons.empty()) throw std::invalid_argument("no horizons configured");
    for (int h : horizons)
        if (h < 1) throw std::invalid_argument("horizons must be >= 1");
    if (models.empty()) throw std::invalid_argument("model list is empty");
    std::vector<std::string> ids;
    for (const auto& m : models) {
        validate_basis(m.basis);
        ids.push_back(m.id());
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw std::invalid_argument("duplicate model ids");
    if (holdout_end && *holdout_end < holdout_start) throw std::invalid_argument("holdout_end precedes holdout_start");
    if (jobs < 0) throw std::invalid_argument("jobs must be >= 0");
    if (fit.max_iter < 1 || !(fit.tol > 0.0)) throw std::invalid_argument("fit.max_iter and fit.tol must be positive");
}

bool QuantilePathForecast::complete() const {
    return std::all_of(ok.begin(), ok.end(), [](bool b) { return b; }) && quantiles.size() == q.size();
}

QuantilePathForecast rearrange_quantiles(const QuantilePathForecast& path) {
    QuantilePathForecast out = path;
    if (!path.complete()) return out;
    std::sort(out.quantiles.begin(), out.quantiles.end());
    out.crossing_fixed = path.crossing_fixed || out.quantiles != path.quantiles;
    return out;
}

WindowDesign prepare_window(const Panel& panel, const Quarter& origin, int horizon, const BasisKind& basis,
                            bool need_minnesota_scales) {
    const auto end = panel.index_of(origin);
    if (end < 0) throw std::invalid_argument("origin " + origin.str() + " is not in the panel");
    const Eigen::Index n = end + 1;
    const std::vector<Quarter> dates(panel.dates.begin(), panel.dates.begin() + n);
    const auto design = build_direct_design(panel.X_raw.topRows(n), panel.y.head(n), dates, horizon);

    const auto scaling = Standardizer::fit(design.F);
    WindowDesign w;
    w.origin = origin;
    w.horizon = horizon;
    w.dates = design.dates;
    w.y = design.y_h;
    w.X_linear = scaling.apply(design.F);
    const Vector x_new = scaling.apply(design.f_last);

    w.expansion = build_basis(basis, w.X_linear);
    const auto K = w.X_linear.cols();
    const auto M = w.expansion.M();
    w.split = BlockSplit{K, M, true};
    w.F.resize(w.X_linear.rows(), 1 + K + M);
    w.F.col(0).setOnes();
    w.F.middleCols(1, K) = w.X_linear;
    if (M > 0) w.F.rightCols(M) = w.expansion.Z;
    w.f_new.resize(1 + K + M);
    w.f_new[0] = 1.0;
    w.f_new.segment(1, K) = x_new;
    if (M > 0) w.f_new.tail(M) = evaluate_basis(w.expansion, x_new);

    w.own_lag.assign(static_cast<std::size_t>(K), false);
    w.own_lag.back() = true;
    if (need_minnesota_scales) w.minnesota_scale = minnesota_scales(w.y, w.X_linear);
    return w;
}

VbState fit_window(const WindowDesign& window, const ModelSpec& model, double q, const FitOptions& options, const VbState* start) {
    FitOptions opt = options;
    if (is_minnesota(model.prior)) {
        opt.linear_scale = window.minnesota_scale.size() ? window.minnesota_scale : minnesota_scales(window.y, window.X_linear);
        opt.own_lag = window.own_lag;
    }
    return vb_fit(window.F, window.y, q, model.prior, window.split, opt, start);
}

std::vector<std::size_t> warm_start_order(const std::vector<double>& grid) {
    std::vector<std::size_t> order;
    if (grid.empty()) return order;
    std::size_t mid = 0;
    for (std::size_t k = 1; k < grid.size(); ++k)
        if (std::abs(grid[k] - 0.5) < std::abs(grid[mid] - 0.5)) mid = k;
    for (std::size_t k = mid; k < grid.size(); ++k) order.push_back(k);
    for (std::size_t k = mid; k-- > 0;) order.push_back(k);
    return order;
}

std::vector<QuantileFit> fit_quantile_grid(const WindowDesign& window, const ModelSpec& model, const std::vector<double>& grid,
                                           const FitOptions& options, bool warm_start) {
    std::vector<QuantileFit> out(grid.size());
    const auto order = warm_start_order(grid);
    for (std::size_t n = 0; n < order.size(); ++n) {
        const std::size_t k = order[n];
        // neighbour toward the median, already fitted
        const VbState* start = nullptr;
        if (warm_start && n > 0) {
            const std::size_t prev = k > order[0] ? k - 1 : k + 1;
            if (out[prev].state) start = &*out[prev].state;
        }
        try {
            VbState s = fit_window(window, model, grid[k], options, start);
            const double f = window.f_new.dot(s.E_beta);
            if (!std::isfinite(f)) throw std::runtime_error("non-finite forecast");
            out[k].forecast = f;
            out[k].state = std::move(s);
        } catch (const std::exception& e) {
            out[k].error = e.what();
        }
    }
    return out;
}

std::vector<Quarter> forecast_origins(const Panel& panel, const ExperimentConfig& config, int horizon) {
    if (panel.rows() == 0) return {};
    const Quarter last_target = config.holdout_end.value_or(panel.dates.back());
    std::vector<Quarter> out;
    for (Quarter target = config.holdout_start; target <= last_target; target = target.shifted(1)) {
        const Quarter origin = target.shifted(-horizon);
        if (panel.index_of(origin) < 0) {
            if (origin > panel.dates.back()) break;
            throw std::invalid_argument("forecast origin " + origin.str() + " lies outside the panel");
        }
        out.push_back(origin);
    }
    return out;
}

namespace {

struct Task {
    int horizon;
    Quarter origin;
    std::size_t model;
};

void run_parallel(std::size_t n_tasks, int jobs, const std::function<void(std::size_t)>& body) {
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t workers = std::min<std::size_t>(n_tasks, jobs > 0 ? static_cast<std::size_t>(jobs) : hw);
    std::atomic<std::size_t> next{0};
    auto loop = [&] {
        for (std::size_t i = next++; i < n_tasks; i = next++) body(i);
    };
    if (workers <= 1) {
        loop();
        return;
    }
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < workers; ++k) pool.emplace_back(loop);
    for (auto& t : pool) t.join();
}

}  // namespace

ExperimentResult run_experiment(const Panel& panel, const ExperimentConfig& config) {
    config.validate();
    std::vector<Task> tasks;
    for (int h : config.horizons)
        for (const auto& origin : forecast_origins(panel, config, h))
            for (std::size_t m = 0; m < config.models.size(); ++m) tasks.push_back(Task{h, origin, m});

    const std::size_t nq = config.quantile_grid.size();
    std::vector<QuantilePathForecast> paths(tasks.size());
    std::vector<std::vector<FitFailure>> failures(tasks.size());

    run_parallel(tasks.size(), config.jobs, [&](std::size_t i) {
        const Task& task = tasks[i];
        const ModelSpec& model = config.models[task.model];
        QuantilePathForecast& path = paths[i];
        path.origin = task.origin;
        path.horizon = task.horizon;
        path.model_id = model.id();
        path.q = config.quantile_grid;
        path.quantiles.assign(nq, std::numeric_limits<double>::quiet_NaN());
        path.iterations.assign(nq, 0);
        path.converged.assign(nq, false);
        path.ok.assign(nq, false);
        path.logdet_linear.assign(nq, std::numeric_limits<double>::quiet_NaN());
        path.logdet_nonlinear.assign(nq, std::numeric_limits<double>::quiet_NaN());
        const auto target_row = panel.index_of(path.target());
        if (target_row >= 0) path.realized = panel.y[target_row];

        WindowDesign window;
        try {
            window = prepare_window(panel, task.origin, task.horizon, model.basis, is_minnesota(model.prior));
        } catch (const std::exception& e) {
            for (double q : config.quantile_grid) failures[i].push_back(FitFailure{task.origin, task.horizon, path.model_id, q, e.what()});
            return;
        }
        FitOptions opt = config.fit;
        opt.full_cov = false;
        const auto fits = fit_quantile_grid(window, model, config.quantile_grid, opt, config.warm_start);
        for (std::size_t k = 0; k < nq; ++k) {
            const auto& fit = fits[k];
            if (!fit.state) {
                failures[i].push_back(FitFailure{task.origin, task.horizon, path.model_id, config.quantile_grid[k], fit.error});
                continue;
            }
            path.quantiles[k] = fit.forecast;
            path.iterations[k] = fit.state->iterations;
            path.converged[k] = fit.state->converged;
            path.ok[k] = true;
            path.logdet_linear[k] = shrinkage_logdet(fit.state->prior_linear);
            path.logdet_nonlinear[k] = shrinkage_logdet(fit.state->prior_nonlinear);
        }
        if (config.rearrange) path = rearrange_quantiles(path);
    });

    ExperimentResult result;
    result.paths = std::move(paths);
    result.fits_attempted = tasks.size() * nq;
    for (auto& f : failures) result.failures.insert(result.failures.end(), f.begin(), f.end());
    return result;
}

std::string forecast_store_csv(const std::vector<QuantilePathForecast>& paths) {
    std::ostringstream out;
    out << "origin,horizon,model_id,q,forecast,realized,crossing_fixed,iterations,converged\n";
    for (const auto& p : paths) {
        for (std::size_t k = 0; k < p.q.size(); ++k) {
            out << p.origin.str() << ',' << p.horizon << ',' << io::csv_escape(p.model_id) << ',' << io::format_double(p.q[k]) << ','
                << io::format_double(p.quantiles[k]) << ',' << io::format_double(p.realized) << ',' << (p.crossing_fixed ? 1 : 0) << ','
                << p.iterations[k] << ',' << (p.converged[k] ? 1 : 0) << '\n';
        }
    }
    return out.str();
}

std::vector<QuantilePathForecast> parse_forecast_store(const std::string& csv_text) {
    const auto rows = io::parse_csv(csv_text);
    if (rows.empty()) throw std::invalid_argument("forecast store is empty");
    const io::CsvRow expected{"origin", "horizon", "model_id", "q", "forecast", "realized", "crossing_fixed", "iterations", "converged"};
    if (rows[0] != expected) throw std::invalid_argument("forecast store header does not match the schema");
    std::vector<QuantilePathForecast> out;
    std::map<std::tuple<int, int, std::string>, std::size_t> index;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() == 1 && row[0].empty()) continue;
        if (row.size() != expected.size()) throw std::invalid_argument("forecast store row " + std::to_string(r) + " has wrong width");
        const Quarter origin = Quarter::parse(row[0]);
        const int h = std::stoi(row[1]);
        const auto key = std::make_tuple(origin.ordinal(), h, row[2]);
        auto it = index.find(key);
        if (it == index.end()) {
            it = index.emplace(key, out.size()).first;
            QuantilePathForecast p;
            p.origin = origin;
            p.horizon = h;
            p.model_id = row[2];
            p.realized = io::parse_double(row[5]);
            p.crossing_fixed = row[6] == "1";
            out.push_back(std::move(p));
        }
        auto& p = out[it->second];
        p.q.push_back(io::parse_double(row[3]));
        const double f = io::parse_double(row[4]);
        p.quantiles.push_back(f);
        p.ok.push_back(std::isfinite(f));
        p.iterations.push_back(std::stoi(row[7]));
        p.converged.push_back(row[8] == "1");
        p.logdet_linear.push_back(std::numeric_limits<double>::quiet_NaN());
        p.logdet_nonlinear.push_back(std::numeric_limits<double>::quiet_NaN());
    }
    return out;
}

std::vector<QuantilePathForecast> read_forecast_store(const std::filesystem::path& path) {
    return parse_forecast_store(io::read_file(path));
}

std::string failures_csv(const std::vector<FitFailure>& failures) {
    std::ostringstream out;
    out << "origin,horizon,model_id,q,message\n";
    for (const auto& f : failures)
        out << f.origin.str() << ',' << f.horizon << ',' << io::csv_escape(f.model_id) << ',' << io::format_double(f.q) << ','
            << io::csv_escape(f.message) << '\n';
    return out.str();
}

namespace {

nlohmann::json prior_json(const PriorFamily& p) {
    nlohmann::json j;
    j["family"] = prior_name(p);
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, prior::Ridge>) {
                j["e0"] = v.e0;
                j["e1"] = v.e1;
            } else if constexpr (std::is_same_v<T, prior::NormalGamma>) {
                j["theta"] = v.theta;
                j["c0"] = v.c0;
                j["d0"] = v.d0;
            } else if constexpr (std::is_same_v<T, prior::Lasso>) {
                j["c0"] = v.c0;
                j["d0"] = v.d0;
            } else if constexpr (std::is_same_v<T, prior::DirichletLaplace>) {
                j["alpha"] = v.alpha;
            } else if constexpr (std::is_same_v<T, prior::MinnesotaFixed>) {
                j["l1"] = v.l1;
                j["l2"] = v.l2;
            } else if constexpr (std::is_same_v<T, prior::MinnesotaGamma>) {
                j["c"] = v.c;
                j["d"] = v.d;
            }
        },
        p);
    return j;
}

nlohmann::json basis_json(const BasisKind& b) {
    nlohmann::json j;
    j["kind"] = basis_name(b);
    if (auto* p = std::get_if<basis::Polynomial>(&b)) j["max_degree"] = p->max_degree;
    if (auto* s = std::get_if<basis::Spline>(&b)) j["knot_quantiles"] = s->knot_quantiles;
    if (auto* g = std::get_if<basis::GaussianProcess>(&b)) {
        j["w1"] = g->w1;
        j["w2"] = g->w2;
    }
    return j;
}

}  // namespace

nlohmann::json experiment_config_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["quantile_grid"] = c.quantile_grid;
    j["horizons"] = c.horizons;
    nlohmann::json models = nlohmann::json::array();
    for (const auto& m : c.models) models.push_back({{"prior", prior_json(m.prior)}, {"basis", basis_json(m.basis)}, {"id", m.id()}});
    j["models"] = models;
    j["holdout_start"] = c.holdout_start.str();
    j["holdout_end"] = c.holdout_end ? nlohmann::json(c.holdout_end->str()) : nlohmann::json(nullptr);
    j["seed"] = c.seed;
    j["rearrange"] = c.rearrange;
    j["warm_start"] = c.warm_start;
    j["fit"] = {{"max_iter", c.fit.max_iter}, {"tol", c.fit.tol}, {"intercept_precision", c.fit.intercept_precision},
                {"c0", c.fit.c0}, {"d0", c.fit.d0}};
    return j;
}

ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
    ExperimentConfig c;
    if (j.contains("quantile_grid")) c.quantile_grid = j.at("quantile_grid").get<std::vector<double>>();
    if (j.contains("horizons")) c.horizons = j.at("horizons").get<std::vector<int>>();
    if (j.contains("models")) {
        for (const auto& m : j.at("models")) c.models.push_back(ModelSpec{parse_prior(m.at("prior")), parse_basis(m.at("basis"))});
    } else {
        std::vector<PriorFamily> priors;
        std::vector<BasisKind> bases;
        for (const auto& p : j.value("priors", nlohmann::json::array())) priors.push_back(parse_prior(p));
        for (const auto& b : j.value("bases", nlohmann::json::array({"none"}))) bases.push_back(parse_basis(b));
        c.models = model_grid(priors, bases);
    }
    if (j.contains("holdout_start")) c.holdout_start = Quarter::parse(j.at("holdout_start").get<std::string>());
    if (j.contains("holdout_end") && !j.at("holdout_end").is_null()) c.holdout_end = Quarter::parse(j.at("holdout_end").get<std::string>());
    c.seed = j.value("seed", c.seed);
    c.rearrange = j.value("rearrange", c.rearrange);
    c.warm_start = j.value("warm_start", c.warm_start);
    c.jobs = j.value("jobs", c.jobs);
    if (j.contains("fit")) {
        const auto& f = j.at("fit");
        c.fit.max_iter = f.value("max_iter", c.fit.max_iter);
        c.fit.tol = f.value("tol", c.fit.tol);
        c.fit.intercept_precision = f.value("intercept_precision", c.fit.intercept_precision);
        c.fit.c0 = f.value("c0", c.fit.c0);
        c.fit.d0 = f.value("d0", c.fit.d0);
    }
    c.validate();
    return c;
}

}  // namespace tailqr
