#pragma once

#include "tailqr/basis.hpp"
#include "tailqr/data.hpp"
#include "tailqr/priors.hpp"
#include "tailqr/vb.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace tailqr {

/// 0.05, 0.10, ..., 0.95.
std::vector<double> default_quantile_grid();

struct ModelSpec {
    PriorFamily prior;
    BasisKind basis;
    /// "<prior>-<basis>", e.g. "ridge-gp".
    std::string id() const;
};

struct ExperimentConfig {
    std::vector<double> quantile_grid = default_quantile_grid();
    std::vector<int> horizons{1, 4};
    std::vector<ModelSpec> models;
    /// First and last target quarters of the hold-out.
    Quarter holdout_start{1991, 2};
    std::optional<Quarter> holdout_end;
    std::uint64_t seed = 1;
    bool rearrange = true;
    /// Each quantile fit starts from the converged state of its neighbour
    /// toward the median instead of the prior initialization.
    bool warm_start = true;
    /// 0 means std::thread::hardware_concurrency().
    int jobs = 0;
    FitOptions fit;

    /// Throws std::invalid_argument on an unusable configuration.
    void validate() const;
};

/// Models for every prior x basis pair, priors outermost.
std::vector<ModelSpec> model_grid(const std::vector<PriorFamily>& priors, const std::vector<BasisKind>& bases);

struct QuantilePathForecast {
    Quarter origin;
    int horizon = 1;
    std::string model_id;
    std::vector<double> q;
    std::vector<double> quantiles;
    double realized = std::numeric_limits<double>::quiet_NaN();
    bool crossing_fixed = false;
    std::vector<int> iterations;
    std::vector<bool> converged;
    /// false where the fit for that quantile failed (quantile is NaN).
    std::vector<bool> ok;
    /// Shrinkage diagnostic per quantile (NaN for an empty block).
    std::vector<double> logdet_linear;
    std::vector<double> logdet_nonlinear;

    Quarter target() const { return origin.shifted(horizon); }
    bool complete() const;
};

/// Sorts the quantile vector ascending; crossing_fixed records whether any
/// entry moved. Paths with failed quantiles are returned unchanged.
QuantilePathForecast rearrange_quantiles(const QuantilePathForecast& path);

/// Regression problem for one origin, horizon and basis: rows of the
/// training window whose target is observed by the origin.
struct WindowDesign {
    Quarter origin;
    int horizon = 1;
    /// Stacked [1 | linear | basis] training design.
    Matrix F;
    Vector y;
    /// Stacked regressors at the origin.
    Vector f_new;
    BlockSplit split;
    /// Standardized linear block (training rows), for summaries.
    Matrix X_linear;
    std::vector<Quarter> dates;
    BasisExpansion expansion;
    Vector minnesota_scale;
    std::vector<bool> own_lag;
};

/// Uses only panel rows dated at or before `origin`. Standardization and the
/// basis are fitted on the training rows.
WindowDesign prepare_window(const Panel& panel, const Quarter& origin, int horizon, const BasisKind& basis,
                            bool need_minnesota_scales);

/// Single quantile fit on a prepared window, optionally resumed from `start`.
VbState fit_window(const WindowDesign& window, const ModelSpec& model, double q, const FitOptions& options,
                   const VbState* start = nullptr);

struct QuantileFit {
    std::optional<VbState> state;
    double forecast = std::numeric_limits<double>::quiet_NaN();
    std::string error;
};

/// Grid indices starting at the quantile closest to 0.5, then upward, then
/// downward.
std::vector<std::size_t> warm_start_order(const std::vector<double>& grid);

/// Fits every grid quantile on one window; failures carry the message.
std::vector<QuantileFit> fit_quantile_grid(const WindowDesign& window, const ModelSpec& model, const std::vector<double>& grid,
                                           const FitOptions& options, bool warm_start);

struct FitFailure {
    Quarter origin;
    int horizon = 1;
    std::string model_id;
    double q = 0.0;
    std::string message;
};

struct ExperimentResult {
    std::vector<QuantilePathForecast> paths;
    std::vector<FitFailure> failures;
    std::size_t fits_attempted = 0;
};

/// Origins for one horizon: target quarters from holdout_start to the end of
/// the hold-out, shifted back by the horizon.
std::vector<Quarter> forecast_origins(const Panel& panel, const ExperimentConfig& config, int horizon);

/// Expanding-window direct forecasts for every origin, horizon, model and
/// quantile. Output order is (horizon, origin, model), independent of `jobs`.
ExperimentResult run_experiment(const Panel& panel, const ExperimentConfig& config);

std::string forecast_store_csv(const std::vector<QuantilePathForecast>& paths);
/// Groups rows back into paths; iteration and convergence columns restored.
std::vector<QuantilePathForecast> parse_forecast_store(const std::string& csv_text);
std::vector<QuantilePathForecast> read_forecast_store(const std::filesystem::path& path);

std::string failures_csv(const std::vector<FitFailure>& failures);

nlohmann::json experiment_config_json(const ExperimentConfig& config);
ExperimentConfig parse_experiment_config(const nlohmann::json& j);

}  // namespace tailqr
