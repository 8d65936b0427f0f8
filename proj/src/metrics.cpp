#include "tailqr/metrics.hpp"

#include "tailqr/io.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace tailqr {

double quantile_score(double y, double Q, double q) { return (y - Q) * (q - (y <= Q ? 1.0 : 0.0)); }

std::string weight_metric_name(CrpsWeight w) {
    switch (w) {
        case CrpsWeight::Uniform: return "CRPS";
        case CrpsWeight::Left: return "CRPS-l";
        case CrpsWeight::Tails: return "CRPS-t";
        case CrpsWeight::Right: return "CRPS-r";
    }
    return "CRPS";
}

double crps_weight(CrpsWeight w, double z) {
    switch (w) {
        case CrpsWeight::Uniform: return 1.0;
        case CrpsWeight::Left: return (1.0 - z) * (1.0 - z);
        case CrpsWeight::Tails: return (2.0 * z - 1.0) * (2.0 * z - 1.0);
        case CrpsWeight::Right: return z * z;
    }
    return 1.0;
}

double qw_crps(const std::vector<double>& q, const std::vector<double>& quantiles, double realized, CrpsWeight w) {
    const std::size_t n = q.size();
    if (n == 0 || quantiles.size() != n) throw std::invalid_argument("qw_crps: quantile grid and forecast differ in length");
    const double J = static_cast<double>(n + 1);
    for (std::size_t j = 0; j < n; ++j)
        if (std::abs(q[j] - static_cast<double>(j + 1) / J) > 1e-9) throw std::invalid_argument("qw_crps: missing grid points");
    if (!std::isfinite(realized)) throw std::invalid_argument("qw_crps: realization missing");
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        if (!std::isfinite(quantiles[j])) throw std::invalid_argument("qw_crps: missing grid points");
        s += crps_weight(w, q[j]) * quantile_score(realized, quantiles[j], q[j]);
    }
    return 2.0 / static_cast<double>(n) * s;
}

double qw_crps(const QuantilePathForecast& path, CrpsWeight w) { return qw_crps(path.q, path.quantiles, path.realized, w); }

DmResult dm_test(const std::vector<double>& loss_a, const std::vector<double>& loss_b, int horizon) {
    if (loss_a.size() != loss_b.size()) throw std::invalid_argument("dm_test: series differ in length");
    if (loss_a.size() < 10) throw std::invalid_argument("dm_test: need at least 10 observations");
    if (horizon < 1) throw std::invalid_argument("dm_test: horizon must be >= 1");
    const std::size_t n = loss_a.size();
    const double dn = static_cast<double>(n);
    std::vector<double> d(n);
    for (std::size_t t = 0; t < n; ++t) d[t] = loss_a[t] - loss_b[t];
    double mean = 0.0;
    for (double v : d) mean += v;
    mean /= dn;

    auto autocov = [&](std::size_t k) {
        double s = 0.0;
        for (std::size_t t = k; t < n; ++t) s += (d[t] - mean) * (d[t - k] - mean);
        return s / dn;
    };
    DmResult r;
    r.n = static_cast<int>(n);
    const double g0 = autocov(0);
    if (!(g0 > 0.0)) {
        r.degenerate = true;
        r.statistic = mean == 0.0 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
        r.p_value = mean == 0.0 ? 1.0 : std::numeric_limits<double>::quiet_NaN();
        return r;
    }
    double lrv = g0;
    for (int k = 1; k < horizon && static_cast<std::size_t>(k) < n; ++k) lrv += 2.0 * autocov(static_cast<std::size_t>(k));
    if (!(lrv > 0.0)) {
        r.hac_fallback = true;
        lrv = g0;
    }
    const double h = horizon;
    const double harvey = std::sqrt((dn + 1.0 - 2.0 * h + h * (h - 1.0) / dn) / dn);
    r.statistic = harvey * mean / std::sqrt(lrv / dn);
    const boost::math::students_t dist(dn - 1.0);
    r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.statistic)));
    return r;
}

ScoreWindow parse_window(const std::string& text) {
    ScoreWindow w;
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("window must look like 2006Q2:2021Q3");
    const std::string a = text.substr(0, colon), b = text.substr(colon + 1);
    if (!a.empty()) w.first = Quarter::parse(a);
    if (!b.empty()) w.last = Quarter::parse(b);
    if (w.first && w.last && *w.last < *w.first) throw std::invalid_argument("window end precedes its start");
    return w;
}

namespace {

struct Metric {
    std::string name;
    std::optional<CrpsWeight> weight;
    std::size_t q_index = 0;
};

std::vector<Metric> metric_list(const std::vector<double>& grid) {
    std::vector<Metric> m{{"CRPS", CrpsWeight::Uniform}, {"CRPS-t", CrpsWeight::Tails}, {"CRPS-l", CrpsWeight::Left}, {"CRPS-r", CrpsWeight::Right}};
    for (std::size_t k = 0; k < grid.size(); ++k) {
        std::ostringstream name;
        name << "QS(" << std::fixed << std::setprecision(2) << grid[k] << ")";
        m.push_back(Metric{name.str(), std::nullopt, k});
    }
    return m;
}

double metric_loss(const Metric& m, const QuantilePathForecast& p) {
    if (m.weight) return qw_crps(p, *m.weight);
    return quantile_score(p.realized, p.quantiles[m.q_index], p.q[m.q_index]);
}

}  // namespace

ScoreReport score_report(const std::vector<QuantilePathForecast>& paths, const std::string& benchmark_id,
                         const ScoreWindow& window) {
    ScoreReport report;
    report.benchmark_id = benchmark_id;

    // (horizon, model) -> target ordinal -> path
    std::map<std::pair<int, std::string>, std::map<int, const QuantilePathForecast*>> usable;
    std::set<std::string> models;
    bool has_benchmark = false;
    std::vector<double> grid;
    for (const auto& p : paths) {
        models.insert(p.model_id);
        if (p.model_id == benchmark_id) has_benchmark = true;
        if (!window.contains(p.target())) continue;
        if (!p.complete() || !std::isfinite(p.realized)) {
            ++report.skipped_paths;
            continue;
        }
        if (grid.empty()) grid = p.q;
        if (p.q != grid) throw std::invalid_argument("score_report: paths use different quantile grids");
        usable[{p.horizon, p.model_id}][p.target().ordinal()] = &p;
    }
    if (!has_benchmark) throw std::invalid_argument("benchmark '" + benchmark_id + "' not found in forecasts");
    if (usable.empty()) throw std::invalid_argument("score window has no overlap with the forecasts");

    const auto metrics = metric_list(grid);
    std::set<int> horizons;
    for (const auto& [key, _] : usable) horizons.insert(key.first);

    for (int h : horizons) {
        const auto bench_it = usable.find({h, benchmark_id});
        if (bench_it == usable.end()) continue;
        const auto& bench = bench_it->second;
        for (const auto& model : models) {
            const auto it = usable.find({h, model});
            if (it == usable.end()) continue;
            std::vector<int> dates;
            for (const auto& [d, _] : it->second)
                if (bench.count(d)) dates.push_back(d);
            if (dates.empty()) continue;
            for (const auto& m : metrics) {
                std::vector<double> la, lb;
                for (int d : dates) {
                    la.push_back(metric_loss(m, *it->second.at(d)));
                    lb.push_back(metric_loss(m, *bench.at(d)));
                }
                double sa = 0.0, sb = 0.0;
                for (std::size_t t = 0; t < la.size(); ++t) {
                    sa += la[t];
                    sb += lb[t];
                    if (m.weight)
                        report.cumulative.push_back(CumulativePoint{Quarter::from_ordinal(dates[t]), h, model, m.name,
                                                                    sb > 0.0 ? sa / sb : std::numeric_limits<double>::quiet_NaN()});
                }
                ScoreRow row;
                row.model_id = model;
                row.horizon = h;
                row.metric = m.name;
                row.n = static_cast<int>(la.size());
                row.mean_score = sa / static_cast<double>(la.size());
                row.relative = model == benchmark_id ? 1.0 : (sb > 0.0 ? sa / sb : std::numeric_limits<double>::quiet_NaN());
                if (la.size() >= 10) {
                    row.dm = dm_test(la, lb, h);
                } else {
                    row.dm.statistic = row.dm.p_value = std::numeric_limits<double>::quiet_NaN();
                    row.dm.n = row.n;
                }
                row.first_target = Quarter::from_ordinal(dates.front());
                row.last_target = Quarter::from_ordinal(dates.back());
                report.rows.push_back(row);
            }
        }
    }
    return report;
}

namespace {

std::string dm_flag(const DmResult& r) {
    if (r.degenerate) return "identical losses";
    if (r.hac_fallback) return "lag-0 variance";
    if (r.n < 10) return "too few observations";
    return "";
}

}  // namespace

std::string score_table_csv(const ScoreReport& report) {
    std::ostringstream out;
    out << "model_id,horizon,metric,mean_score,relative,dm_stat,dm_pvalue,dm_flag,n,first_target,last_target\n";
    for (const auto& r : report.rows)
        out << io::csv_escape(r.model_id) << ',' << r.horizon << ',' << io::csv_escape(r.metric) << ',' << io::format_double(r.mean_score)
            << ',' << io::format_double(r.relative) << ',' << io::format_double(r.dm.statistic) << ','
            << io::format_double(r.dm.p_value) << ',' << io::csv_escape(dm_flag(r.dm)) << ',' << r.n << ',' << r.first_target.str()
            << ',' << r.last_target.str() << '\n';
    return out.str();
}

std::string score_table_text(const ScoreReport& report) {
    const std::vector<std::string> cols{"CRPS", "CRPS-t", "CRPS-l", "CRPS-r"};
    std::ostringstream out;
    std::map<int, std::map<std::string, std::map<std::string, const ScoreRow*>>> grid;
    for (const auto& r : report.rows) grid[r.horizon][r.model_id][r.metric] = &r;
    for (const auto& [h, models] : grid) {
        out << "h = " << h << " (relative to " << report.benchmark_id << ")\n";
        out << std::left << std::setw(24) << "model";
        for (const auto& c : cols) out << std::right << std::setw(18) << c;
        out << '\n';
        for (const auto& [model, metrics] : models) {
            out << std::left << std::setw(24) << model;
            for (const auto& c : cols) {
                std::ostringstream cell;
                const auto it = metrics.find(c);
                if (it == metrics.end()) {
                    cell << "-";
                } else if (model == report.benchmark_id) {
                    cell << std::fixed << std::setprecision(3) << it->second->mean_score;
                } else {
                    cell << std::fixed << std::setprecision(3) << it->second->relative;
                    if (std::isfinite(it->second->dm.p_value)) cell << " (" << std::setprecision(2) << it->second->dm.p_value << ")";
                }
                out << std::right << std::setw(18) << cell.str();
            }
            out << '\n';
        }
        out << '\n';
    }
    return out.str();
}

std::string cumulative_csv(const ScoreReport& report) {
    std::ostringstream out;
    out << "date,horizon,model_id,metric,cumulative_ratio\n";
    for (const auto& c : report.cumulative)
        out << c.date.str() << ',' << c.horizon << ',' << io::csv_escape(c.model_id) << ',' << c.metric << ','
            << io::format_double(c.cumulative_ratio) << '\n';
    return out.str();
}

}  // namespace tailqr
