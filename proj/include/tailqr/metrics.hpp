#pragma once

#include "tailqr/data.hpp"
#include "tailqr/forecast.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tailqr {

/// (y - Q)(q - 1{y <= Q}). Zero at y == Q.
double quantile_score(double y, double Q, double q);

enum class CrpsWeight { Uniform, Left, Tails, Right };

/// "CRPS", "CRPS-l", "CRPS-t", "CRPS-r".
std::string weight_metric_name(CrpsWeight w);

/// Weight at zeta: 1, (1 - z)^2, (2z - 1)^2, z^2.
double crps_weight(CrpsWeight w, double zeta);

/// (2 / (J - 1)) sum_j w(zeta_j) QS_j over the grid zeta_j = j / J. The
/// quantile levels must be exactly that grid.
double qw_crps(const std::vector<double>& q, const std::vector<double>& quantiles, double realized, CrpsWeight w);
double qw_crps(const QuantilePathForecast& path, CrpsWeight w);

struct DmResult {
    double statistic = 0.0;
    double p_value = 1.0;
    int n = 0;
    /// Loss differential has zero sample variance ("identical losses").
    bool degenerate = false;
    /// HAC variance was not positive; lag-0 variance was used.
    bool hac_fallback = false;
};

/// Diebold-Mariano statistic on loss_a - loss_b with a rectangular HAC
/// variance (lags 0..h-1) and the Harvey small-sample factor; two-sided
/// p-value from t(n - 1). Positive statistic: model a has larger losses.
DmResult dm_test(const std::vector<double>& loss_a, const std::vector<double>& loss_b, int horizon);

struct ScoreWindow {
    std::optional<Quarter> first;
    std::optional<Quarter> last;
    bool contains(const Quarter& d) const { return (!first || !(d < *first)) && (!last || !(*last < d)); }
};

/// "2006Q2:2021Q3"; either side may be empty.
ScoreWindow parse_window(const std::string& text);

struct ScoreRow {
    std::string model_id;
    int horizon = 1;
    std::string metric;
    double mean_score = 0.0;
    double relative = 1.0;
    DmResult dm;
    int n = 0;
    Quarter first_target;
    Quarter last_target;
};

struct CumulativePoint {
    Quarter date;
    int horizon = 1;
    std::string model_id;
    std::string metric;
    double cumulative_ratio = 1.0;
};

struct ScoreReport {
    std::string benchmark_id;
    std::vector<ScoreRow> rows;
    std::vector<CumulativePoint> cumulative;
    /// Paths left out because a quantile failed or the realization is missing.
    std::size_t skipped_paths = 0;
};

/// Metric list: CRPS, CRPS-t, CRPS-l, CRPS-r, then QS(q) for every grid point.
/// Scores are taken over target dates where both the model and the benchmark
/// have complete paths with a realization.
ScoreReport score_report(const std::vector<QuantilePathForecast>& paths, const std::string& benchmark_id,
                         const ScoreWindow& window = {});

/// model_id, horizon, metric, mean_score, relative, dm_stat, dm_pvalue, dm_flag, n, first_target, last_target
std::string score_table_csv(const ScoreReport& report);
/// Relative scores with DM p-values in brackets, one block per horizon.
std::string score_table_text(const ScoreReport& report);
/// date, horizon, model_id, metric, cumulative_ratio
std::string cumulative_csv(const ScoreReport& report);

}  // namespace tailqr
