#include "tailqr/cli.hpp"

#include "tailqr/forecast.hpp"
#include "tailqr/io.hpp"
#include "tailqr/mcmc.hpp"
#include "tailqr/metrics.hpp"
#include "tailqr/summary.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

namespace tailqr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct Context {
    std::string command;
    json config = json::object();
    fs::path config_dir = ".";
    fs::path output_dir = "out";
    int jobs = 0;
    std::string started = utc_now();
    std::map<std::string, std::string> inputs;
    std::vector<std::string> outputs;
    std::vector<std::string> warnings;

    fs::path resolve(const std::string& p) const {
        const fs::path path(p);
        return path.is_absolute() ? path : config_dir / path;
    }

    void write(const std::string& name, const std::string& content) {
        const fs::path target = output_dir / name;
        fs::create_directories(target.parent_path());
        io::write_file_atomic(target, content);
        outputs.push_back(name);
    }

    std::string hash_input(const fs::path& path) {
        const auto h = io::git_blob_hash(io::read_file(path));
        inputs[path.string()] = h;
        return h;
    }

    void finish() {
        json m;
        m["command"] = command;
        m["config"] = config;
        m["inputs"] = inputs;
        m["software_version"] = kVersion;
        m["started"] = started;
        m["finished"] = utc_now();
        m["warnings"] = warnings;
        m["outputs"] = outputs;
        fs::create_directories(output_dir);
        io::write_file_atomic(output_dir / ("manifest_" + command + ".json"), m.dump(2) + "\n");
        std::cerr << command << ": wrote " << outputs.size() << " file(s) to " << output_dir.string() << "; " << warnings.size()
                  << " warning(s)\n";
        for (std::size_t i = 0; i < warnings.size() && i < 10; ++i) std::cerr << "  warning: " << warnings[i] << '\n';
        if (warnings.size() > 10) std::cerr << "  ... see manifest_" << command << ".json\n";
    }
};

// Anything thrown while reading or validating configuration becomes a ConfigError.
template <class F>
auto config_step(F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
}

void load_config(Context& ctx, const std::string& path) {
    if (path.empty()) return;
    config_step([&] {
        const fs::path p(path);
        ctx.config = json::parse(io::read_file(p));
        if (!ctx.config.is_object()) throw ConfigError("config must be a JSON object");
        ctx.config_dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
        ctx.hash_input(p);
        return 0;
    });
}

void resolve_output(Context& ctx, const std::string& flag) {
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) {
        ctx.output_dir = env;
    } else if (!flag.empty()) {
        ctx.output_dir = flag;
    } else if (ctx.config.contains("output_dir")) {
        ctx.output_dir = ctx.resolve(ctx.config.at("output_dir").get<std::string>());
    }
}

Panel load_config_panel(Context& ctx) {
    const auto [csv, spec, options] = config_step([&] {
        if (!ctx.config.contains("data")) throw ConfigError("config has no \"data\" section");
        const json& d = ctx.config.at("data");
        PanelOptions o;
        o.target = d.value("target", o.target);
        o.target_scale = d.value("target_scale", o.target_scale);
        o.min_rows = d.value("min_rows", o.min_rows);
        std::string csv_path = d.at("csv").get<std::string>();
        if (const char* env = std::getenv("TAILQR_PANEL_CSV"); env && *env) csv_path = env;
        return std::tuple{ctx.resolve(csv_path), ctx.resolve(d.at("spec").get<std::string>()), o};
    });
    ctx.hash_input(csv);
    ctx.hash_input(spec);
    return load_panel(csv, spec, options);
}

ExperimentConfig experiment_from(Context& ctx) {
    return config_step([&] {
        ExperimentConfig c = parse_experiment_config(ctx.config.value("experiment", json::object()));
        c.seed = ctx.config.value("seed", c.seed);
        if (ctx.jobs > 0) c.jobs = ctx.jobs;
        return c;
    });
}

std::vector<std::string> design_names(const Panel& panel) {
    std::vector<std::string> names;
    for (const auto& s : panel.specs) names.push_back(s.name);
    names.push_back(panel.target_name + "_lag");
    return names;
}

std::string q_label(double q) { return io::format_double(q); }

// ---------------------------------------------------------------- fit

int cmd_fit(Context& ctx, const std::string& origin_flag, int horizon_flag, bool covariance) {
    auto panel = load_config_panel(ctx);
    auto exp = experiment_from(ctx);
    const json section = ctx.config.value("fit", json::object());
    const auto [origin, horizon] = config_step([&] {
        const std::string o = !origin_flag.empty() ? origin_flag : section.value("origin", panel.dates.back().str());
        const int h = horizon_flag > 0 ? horizon_flag : section.value("horizon", 1);
        if (h < 1) throw ConfigError("horizon must be >= 1");
        return std::pair{Quarter::parse(o), h};
    });

    FitOptions opt = exp.fit;
    opt.full_cov = covariance;
    for (const auto& model : exp.models) {
        const auto window = prepare_window(panel, origin, horizon, model.basis, is_minnesota(model.prior));
        for (const auto& w : window.expansion.warnings) ctx.warnings.push_back(model.id() + ": " + w);
        const auto fits = fit_quantile_grid(window, model, exp.quantile_grid, opt, exp.warm_start);
        for (std::size_t k = 0; k < fits.size(); ++k) {
            const std::string stem = model.id() + "_h" + std::to_string(horizon) + "_q" + q_label(exp.quantile_grid[k]);
            if (!fits[k].state) {
                ctx.warnings.push_back(stem + ": " + fits[k].error);
                continue;
            }
            const auto& s = *fits[k].state;
            if (!s.converged) ctx.warnings.push_back(stem + ": not converged after " + std::to_string(s.iterations) + " iterations");
            json j = vb_state_json(s);
            j["model_id"] = model.id();
            j["origin"] = origin.str();
            j["horizon"] = horizon;
            j["forecast"] = fits[k].forecast;
            j["basis"] = basis_metadata(window.expansion);
            ctx.write("fit/" + stem + ".json", j.dump(2) + "\n");
            if (covariance) {
                fs::create_directories(ctx.output_dir / "fit");
                write_matrix_binary(s.Sigma_beta, ctx.output_dir / "fit" / (stem + "_cov.bin"));
                ctx.outputs.push_back("fit/" + stem + "_cov.bin");
            }
        }
    }
    return kExitOk;
}

// ---------------------------------------------------------------- forecast

std::string shrinkage_csv(const std::vector<QuantilePathForecast>& paths) {
    std::ostringstream out;
    out << "origin,horizon,model_id,block,logdet\n";
    for (const auto& p : paths) {
        for (const auto& [block, values] : {std::pair{"linear", &p.logdet_linear}, std::pair{"nonlinear", &p.logdet_nonlinear}}) {
            double s = 0.0;
            int n = 0;
            for (double v : *values)
                if (std::isfinite(v)) {
                    s += v;
                    ++n;
                }
            if (n == 0) continue;
            out << p.origin.str() << ',' << p.horizon << ',' << io::csv_escape(p.model_id) << ',' << block << ','
                << io::format_double(s / n) << '\n';
        }
    }
    return out.str();
}

int cmd_forecast(Context& ctx) {
    auto panel = load_config_panel(ctx);
    auto exp = experiment_from(ctx);
    config_step([&] {
        for (int h : exp.horizons) forecast_origins(panel, exp, h);
        return 0;
    });
    const auto result = run_experiment(panel, exp);
    std::size_t not_converged = 0;
    for (const auto& p : result.paths)
        for (std::size_t k = 0; k < p.converged.size(); ++k)
            if (p.ok[k] && !p.converged[k]) ++not_converged;
    if (!result.failures.empty())
        ctx.warnings.push_back(std::to_string(result.failures.size()) + " of " + std::to_string(result.fits_attempted) +
                               " fits failed (see failures.csv)");
    if (not_converged) ctx.warnings.push_back(std::to_string(not_converged) + " fits stopped at max_iter");
    for (std::size_t i = 0; i < result.failures.size() && i < 5; ++i) {
        const auto& f = result.failures[i];
        ctx.warnings.push_back(f.model_id + " " + f.origin.str() + " h=" + std::to_string(f.horizon) + " q=" + q_label(f.q) + ": " + f.message);
    }
    write_panel_csv(panel, ctx.output_dir / "panel.csv");
    ctx.outputs.push_back("panel.csv");
    ctx.write("forecasts.csv", forecast_store_csv(result.paths));
    ctx.write("failures.csv", failures_csv(result.failures));
    ctx.write("shrinkage.csv", shrinkage_csv(result.paths));
    ctx.config["experiment_resolved"] = experiment_config_json(exp);
    return kExitOk;
}

// ---------------------------------------------------------------- evaluate

int cmd_evaluate(Context& ctx, std::string forecasts, std::string benchmark, std::string window, std::string subsample) {
    const json section = ctx.config.value("evaluate", json::object());
    const auto [win, sub, bench, store] = config_step([&] {
        const std::string w = !window.empty() ? window : section.value("window", std::string());
        const std::string s = !subsample.empty() ? subsample : section.value("subsample", std::string());
        const std::string b = !benchmark.empty() ? benchmark : section.value("benchmark", std::string("minnesota-none"));
        const fs::path f = !forecasts.empty() ? fs::path(forecasts)
                           : section.contains("forecasts") ? ctx.resolve(section.at("forecasts").get<std::string>())
                                                           : ctx.output_dir / "forecasts.csv";
        return std::tuple{w.empty() ? ScoreWindow{} : parse_window(w), s.empty() ? std::optional<ScoreWindow>{} : parse_window(s), b, f};
    });
    ctx.hash_input(store);
    const auto paths = read_forecast_store(store);
    const auto report = config_step([&] { return score_report(paths, bench, win); });
    if (report.skipped_paths)
        ctx.warnings.push_back(std::to_string(report.skipped_paths) + " forecast paths skipped (failed fit or no realization)");
    ctx.write("scores.csv", score_table_csv(report));
    ctx.write("scores.txt", score_table_text(report));
    ctx.write("cumulative.csv", cumulative_csv(report));
    if (sub) {
        const auto sub_report = config_step([&] { return score_report(paths, bench, *sub); });
        ctx.write("scores_subsample.csv", score_table_csv(sub_report));
        ctx.write("scores_subsample.txt", score_table_text(sub_report));
    }
    std::cout << score_table_text(report);
    return kExitOk;
}

// ---------------------------------------------------------------- summarize

int cmd_summarize(Context& ctx, const std::string& forecasts_flag) {
    auto panel = load_config_panel(ctx);
    const json section = ctx.config.value("summarize", json::object());
    auto exp = experiment_from(ctx);
    const auto [model, horizon, origin, source, grid] = config_step([&] {
        ModelSpec m{prior::Horseshoe{}, basis::GaussianProcess{}};
        if (section.contains("model")) {
            m.prior = parse_prior(section.at("model").at("prior"));
            m.basis = parse_basis(section.at("model").at("basis"));
        } else if (!exp.models.empty()) {
            m = exp.models.back();
        }
        const int h = section.value("horizon", 1);
        const Quarter o = Quarter::parse(section.value("origin", panel.dates.back().str()));
        const std::string src = section.value("source", std::string("in_sample"));
        if (src != "in_sample" && src != "holdout") throw ConfigError("summarize.source must be in_sample or holdout");
        const auto g = section.contains("quantiles") ? section.at("quantiles").get<std::vector<double>>() : exp.quantile_grid;
        return std::tuple{m, h, o, src, g};
    });
    const auto names = design_names(panel);
    std::vector<LinearSummary> summaries;
    std::ostringstream shrink;
    shrink << "quantile,block,logdet\n";

    if (source == "in_sample") {
        const auto window = prepare_window(panel, origin, horizon, model.basis, is_minnesota(model.prior));
        FitOptions opt = exp.fit;
        opt.full_cov = false;
        const auto fits = fit_quantile_grid(window, model, grid, opt, exp.warm_start);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            if (!fits[k].state) {
                ctx.warnings.push_back("q=" + q_label(grid[k]) + ": " + fits[k].error);
                continue;
            }
            const Vector fitted = window.F * fits[k].state->E_beta;
            summaries.push_back(linearize(fitted, window.X_linear, grid[k], names, opt));
            const auto ld = shrinkage_logdet(fits[k].state->prior_linear, fits[k].state->prior_nonlinear);
            shrink << q_label(grid[k]) << ",linear," << io::format_double(ld.linear) << '\n';
            if (std::isfinite(ld.nonlinear)) shrink << q_label(grid[k]) << ",nonlinear," << io::format_double(ld.nonlinear) << '\n';
        }
    } else {
        const fs::path store = !forecasts_flag.empty() ? fs::path(forecasts_flag) : ctx.output_dir / "forecasts.csv";
        ctx.hash_input(store);
        const auto paths = read_forecast_store(store);
        const Standardizer ys = Standardizer::fit(Matrix(panel.y));
        std::vector<const QuantilePathForecast*> sel;
        for (const auto& p : paths)
            if (p.model_id == model.id() && p.horizon == horizon && p.complete()) sel.push_back(&p);
        if (sel.size() < 10) throw ConfigError("fewer than 10 complete hold-out paths for " + model.id());
        Matrix X(static_cast<Eigen::Index>(sel.size()), panel.cols() + 1);
        for (std::size_t i = 0; i < sel.size(); ++i) {
            const auto r = panel.index_of(sel[i]->origin);
            X.row(static_cast<Eigen::Index>(i)) << panel.X.row(r), (panel.y[r] - ys.mean[0]) / ys.scale[0];
        }
        for (std::size_t k = 0; k < sel.front()->q.size(); ++k) {
            Vector series(static_cast<Eigen::Index>(sel.size()));
            for (std::size_t i = 0; i < sel.size(); ++i) series[static_cast<Eigen::Index>(i)] = sel[i]->quantiles[k];
            summaries.push_back(linearize(series, X, sel.front()->q[k], names, exp.fit));
        }
    }
    for (const auto& s : summaries)
        if (!s.converged) ctx.warnings.push_back("linearization at q=" + q_label(s.q) + " stopped at max_iter");
    ctx.write("summary.csv", summary_csv(summaries, names));
    if (source == "in_sample") ctx.write("summary_shrinkage.csv", shrink.str());
    return kExitOk;
}

// ---------------------------------------------------------------- bench

int cmd_bench(Context& ctx, const std::vector<long>& dims_flag, const BenchOptions& flags, bool flags_set_T, bool no_mcmc) {
    const json section = ctx.config.value("bench", json::object());
    const auto [dims, options] = config_step([&] {
        std::vector<Eigen::Index> d;
        if (!dims_flag.empty())
            d.assign(dims_flag.begin(), dims_flag.end());
        else
            for (long v : section.value("dims", std::vector<long>{50, 200, 500, 1000})) d.push_back(v);
        if (d.empty()) throw ConfigError("no benchmark dimensions");
        for (auto v : d)
            if (v < 1) throw ConfigError("benchmark dimensions must be positive");
        BenchOptions o = flags;
        if (!flags_set_T) o.T = section.value("T", o.T);
        o.mcmc_draws = section.value("mcmc_draws", o.mcmc_draws);
        o.mcmc_burn_in = section.value("mcmc_burn_in", o.mcmc_burn_in);
        o.repeats = section.value("repeats", o.repeats);
        o.seed = ctx.config.value("seed", o.seed);
        o.run_mcmc = !no_mcmc && section.value("mcmc", true);
        if (o.T < 10 || o.mcmc_draws < 1 || o.mcmc_burn_in < 0 || o.repeats < 1) throw ConfigError("invalid benchmark settings");
        return std::pair{d, o};
    });
    for (auto d : dims)
        if (d + 1 > 2000 && options.run_mcmc) ctx.warnings.push_back("dim " + std::to_string(d) + ": dense Gibbs draws above 2000 columns");
    const auto rows = runtime_benchmark(dims, options);
    ctx.write("bench.csv", bench_csv(rows));
    std::cout << bench_csv(rows);
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

int run(int argc, const char* const* argv) {
    CLI::App app{"Bayesian quantile regression forecasting with variational Bayes"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string config_path, output_flag, forecasts, benchmark, window, subsample, origin;
    int jobs = 0, horizon = 0;
    bool covariance = false, no_mcmc = false;
    std::vector<long> dims;
    BenchOptions bench;

    auto add_common = [&](CLI::App* sub, bool need_config) {
        auto* c = sub->add_option("-c,--config", config_path, "JSON config file");
        if (need_config) c->required();
        sub->add_option("-o,--output-dir", output_flag, std::string("Output directory (overridden by ") + kOutputDirEnv + ")");
        sub->add_option("-j,--jobs", jobs, "Worker threads (default: all cores)")->check(CLI::NonNegativeNumber);
    };
    auto* fit = app.add_subcommand("fit", "Fit every model and quantile at one origin");
    add_common(fit, true);
    fit->add_option("--origin", origin, "Forecast origin, e.g. 2021Q2");
    fit->add_option("--horizon", horizon, "Forecast horizon in quarters");
    fit->add_flag("--covariance", covariance, "Also write full coefficient covariances");
    auto* forecast = app.add_subcommand("forecast", "Run the recursive forecasting experiment");
    add_common(forecast, true);
    auto* evaluate = app.add_subcommand("evaluate", "Score a forecast store");
    add_common(evaluate, false);
    evaluate->add_option("--forecasts", forecasts, "Forecast store CSV (default: <output-dir>/forecasts.csv)");
    evaluate->add_option("--benchmark", benchmark, "Benchmark model id");
    evaluate->add_option("--window", window, "Target window FIRST:LAST");
    evaluate->add_option("--subsample", subsample, "Extra sub-window report, e.g. 2006Q2:2021Q3");
    auto* summarize = app.add_subcommand("summarize", "Linearized posterior summaries and shrinkage diagnostics");
    add_common(summarize, true);
    summarize->add_option("--forecasts", forecasts, "Forecast store for source=holdout");
    auto* benchcmd = app.add_subcommand("bench", "VB vs Gibbs runtime against dimension");
    add_common(benchcmd, false);
    benchcmd->add_option("--dims", dims, "Numbers of covariates")->delimiter(',');
    auto* t_opt = benchcmd->add_option("--T", bench.T, "Observations");
    benchcmd->add_option("--draws", bench.mcmc_draws, "Gibbs draws kept");
    benchcmd->add_option("--burn-in", bench.mcmc_burn_in, "Gibbs burn-in");
    benchcmd->add_option("--repeats", bench.repeats, "Timing repeats (median reported)");
    benchcmd->add_flag("--no-mcmc", no_mcmc, "Time VB only");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    Context ctx;
    try {
        ctx.command = app.get_subcommands().front()->get_name();
        load_config(ctx, config_path);
        ctx.jobs = jobs > 0 ? jobs : ctx.config.value("jobs", 0);
        resolve_output(ctx, output_flag);
        int code = kExitOk;
        if (ctx.command == "fit") code = cmd_fit(ctx, origin, horizon, covariance);
        if (ctx.command == "forecast") code = cmd_forecast(ctx);
        if (ctx.command == "evaluate") code = cmd_evaluate(ctx, forecasts, benchmark, window, subsample);
        if (ctx.command == "summarize") code = cmd_summarize(ctx, forecasts);
        if (ctx.command == "bench") code = cmd_bench(ctx, dims, bench, t_opt->count() > 0, no_mcmc);
        ctx.finish();
        return code;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

}  // namespace tailqr::cli
