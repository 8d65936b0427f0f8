#include "tailqr/data.hpp"

#include "tailqr/io.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace tailqr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int parse_int(const std::string& s, const std::string& context) {
    if (s.empty()) throw std::invalid_argument("bad date '" + context + "'");
    for (char c : s)
        if (c < '0' || c > '9') throw std::invalid_argument("bad date '" + context + "'");
    return std::stoi(s);
}

int month_to_quarter(int month, const std::string& text) {
    if (month < 1 || month > 12) throw std::invalid_argument("bad month in date '" + text + "'");
    return (month - 1) / 3 + 1;
}

bool try_parse_quarter(const std::string& text, Quarter& out) {
    try {
        out = Quarter::parse(text);
        return true;
    } catch (const std::invalid_argument&) {
        return false;
    }
}

Vector diff(const Vector& v) {
    Vector out = Vector::Constant(v.size(), kNaN);
    for (Eigen::Index i = 1; i < v.size(); ++i) out[i] = v[i] - v[i - 1];
    return out;
}

Vector checked_log(const Vector& v) {
    Vector out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::isnan(v[i])) {
            out[i] = kNaN;
        } else if (v[i] <= 0.0) {
            throw std::invalid_argument("log transform of non-positive value");
        } else {
            out[i] = std::log(v[i]);
        }
    }
    return out;
}

bool row_complete(const Matrix& X, const Vector& y, Eigen::Index r) {
    if (!std::isfinite(y[r])) return false;
    for (Eigen::Index j = 0; j < X.cols(); ++j)
        if (!std::isfinite(X(r, j))) return false;
    return true;
}

}  // namespace

Quarter Quarter::from_ordinal(int ordinal) {
    const int year = ordinal >= 0 ? ordinal / 4 : (ordinal - 3) / 4;
    return Quarter{year, ordinal - year * 4 + 1};
}

Quarter Quarter::parse(const std::string& raw) {
    std::string text;
    for (char c : raw)
        if (c != ' ' && c != '\t') text.push_back(c);
    if (auto pos = text.find_first_of("Qq"); pos != std::string::npos) {
        const int year = parse_int(text.substr(0, pos), raw);
        const int q = parse_int(text.substr(pos + 1), raw);
        if (q < 1 || q > 4) throw std::invalid_argument("bad quarter in date '" + raw + "'");
        return Quarter{year, q};
    }
    if (text.size() >= 7 && text[4] == '-') {
        const int year = parse_int(text.substr(0, 4), raw);
        auto rest = text.substr(5);
        const int month = parse_int(rest.substr(0, rest.find('-')), raw);
        return Quarter{year, month_to_quarter(month, raw)};
    }
    if (auto first = text.find('/'); first != std::string::npos) {
        auto second = text.find('/', first + 1);
        if (second == std::string::npos) throw std::invalid_argument("bad date '" + raw + "'");
        const int month = parse_int(text.substr(0, first), raw);
        const int year = parse_int(text.substr(second + 1), raw);
        return Quarter{year, month_to_quarter(month, raw)};
    }
    throw std::invalid_argument("bad date '" + raw + "'");
}

std::string Quarter::str() const { return std::to_string(year) + "Q" + std::to_string(q); }

std::vector<SeriesSpec> read_series_specs(const std::filesystem::path& path) {
    const auto doc = nlohmann::json::parse(io::read_file(path));
    if (!doc.is_array()) throw std::invalid_argument("series spec must be a JSON array");
    std::vector<SeriesSpec> specs;
    std::set<std::string> seen;
    for (const auto& item : doc) {
        SeriesSpec s;
        s.name = item.at("name").get<std::string>();
        s.tcode = item.at("tcode").get<int>();
        s.include = item.value("include", true);
        if (s.tcode < 1 || s.tcode > 7)
            throw std::invalid_argument("tcode " + std::to_string(s.tcode) + " outside 1..7 for " + s.name);
        if (!seen.insert(s.name).second) throw std::invalid_argument("duplicate series name " + s.name);
        specs.push_back(std::move(s));
    }
    return specs;
}

Vector apply_tcode(const Vector& raw, int tcode) {
    switch (tcode) {
    case 1: return raw;
    case 2: return diff(raw);
    case 3: return diff(diff(raw));
    case 4: return checked_log(raw);
    case 5: return diff(checked_log(raw));
    case 6: return diff(diff(checked_log(raw)));
    case 7: {
        Vector growth = Vector::Constant(raw.size(), kNaN);
        for (Eigen::Index i = 1; i < raw.size(); ++i) growth[i] = raw[i] / raw[i - 1] - 1.0;
        return diff(growth);
    }
    default: throw std::invalid_argument("tcode " + std::to_string(tcode) + " outside 1..7");
    }
}

Standardizer Standardizer::fit(const Matrix& X) {
    Standardizer s;
    const auto n = X.rows();
    s.mean = X.colwise().mean().transpose();
    s.scale = Vector::Ones(X.cols());
    if (n < 2) return s;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        const double var = (X.col(j).array() - s.mean[j]).square().sum() / static_cast<double>(n - 1);
        const double sd = std::sqrt(var);
        // constant columns are centered only
        if (sd > 1e-12 * (1.0 + std::abs(s.mean[j]))) s.scale[j] = sd;
    }
    return s;
}

Matrix Standardizer::apply(const Matrix& X) const {
    return (X.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

Vector Standardizer::apply(const Vector& x) const { return (x - mean).cwiseQuotient(scale); }

Eigen::Index Panel::index_of(const Quarter& date) const {
    for (std::size_t i = 0; i < dates.size(); ++i)
        if (dates[i] == date) return static_cast<Eigen::Index>(i);
    return -1;
}

Panel Panel::slice(const Quarter& first, const Quarter& last) const {
    Panel out;
    out.target_name = target_name;
    out.specs = specs;
    std::vector<Eigen::Index> keep;
    for (std::size_t i = 0; i < dates.size(); ++i)
        if (dates[i] >= first && dates[i] <= last) keep.push_back(static_cast<Eigen::Index>(i));
    const auto n = static_cast<Eigen::Index>(keep.size());
    out.y.resize(n);
    out.X_raw.resize(n, X_raw.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        out.dates.push_back(dates[keep[i]]);
        out.y[i] = y[keep[i]];
        out.X_raw.row(i) = X_raw.row(keep[i]);
    }
    out.X = Standardizer::fit(out.X_raw).apply(out.X_raw);
    return out;
}

Panel load_panel(const std::filesystem::path& csv_path, const std::filesystem::path& spec_path,
                 const PanelOptions& options) {
    return load_panel(csv_path, read_series_specs(spec_path), options);
}

Panel load_panel(const std::filesystem::path& csv_path, const std::vector<SeriesSpec>& specs,
                 const PanelOptions& options) {
    const auto rows = io::read_csv(csv_path);
    if (rows.empty()) throw std::invalid_argument("empty csv " + csv_path.string());
    const auto& header = rows.front();
    std::unordered_map<std::string, std::size_t> column;
    for (std::size_t j = 1; j < header.size(); ++j) column[header[j]] = j;

    // FRED-QD files carry metadata rows ("factors", "transform") before the data.
    std::vector<std::size_t> data_rows;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        Quarter d;
        if (rows[r].empty() || (rows[r].size() == 1 && rows[r][0].empty())) continue;
        if (try_parse_quarter(rows[r][0], d)) {
            data_rows.push_back(r);
        } else if (!data_rows.empty()) {
            throw std::invalid_argument("bad date '" + rows[r][0] + "' at csv line " + std::to_string(r + 1));
        }
    }

    auto read_column = [&](const std::string& name) {
        auto it = column.find(name);
        if (it == column.end()) throw std::invalid_argument("unknown series name " + name);
        Vector v(static_cast<Eigen::Index>(data_rows.size()));
        for (std::size_t i = 0; i < data_rows.size(); ++i) {
            const auto& row = rows[data_rows[i]];
            const std::string cell = it->second < row.size() ? row[it->second] : std::string();
            try {
                v[static_cast<Eigen::Index>(i)] = io::parse_double(cell);
            } catch (const std::invalid_argument&) {
                throw std::invalid_argument("non-numeric cell '" + cell + "' in series " + name + " at csv line " +
                                            std::to_string(data_rows[i] + 1));
            }
        }
        return v;
    };

    std::set<std::string> seen;
    std::vector<SeriesSpec> used;
    for (const auto& s : specs) {
        if (s.tcode < 1 || s.tcode > 7)
            throw std::invalid_argument("tcode " + std::to_string(s.tcode) + " outside 1..7 for " + s.name);
        if (!seen.insert(s.name).second) throw std::invalid_argument("duplicate series name " + s.name);
        if (!column.contains(s.name)) throw std::invalid_argument("unknown series name " + s.name);
        if (s.include && s.name != options.target) used.push_back(s);
    }

    const auto n_all = static_cast<Eigen::Index>(data_rows.size());
    Vector y;
    try {
        y = options.target_scale * apply_tcode(read_column(options.target), 5);
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string(e.what()) + " (target " + options.target + ")");
    }
    Matrix X(n_all, static_cast<Eigen::Index>(used.size()));
    for (std::size_t j = 0; j < used.size(); ++j) {
        try {
            X.col(static_cast<Eigen::Index>(j)) = apply_tcode(read_column(used[j].name), used[j].tcode);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(std::string(e.what()) + " (series " + used[j].name + ")");
        }
    }

    // longest run of complete rows
    Eigen::Index best_start = 0, best_len = 0, run_start = 0;
    for (Eigen::Index r = 0; r <= n_all; ++r) {
        if (r < n_all && row_complete(X, y, r)) continue;
        if (r - run_start > best_len) {
            best_len = r - run_start;
            best_start = run_start;
        }
        run_start = r + 1;
    }
    if (best_len < options.min_rows)
        throw std::invalid_argument("only " + std::to_string(best_len) + " usable rows (need " +
                                    std::to_string(options.min_rows) + ")");

    Panel panel;
    panel.target_name = options.target;
    panel.specs = used;
    panel.y = y.segment(best_start, best_len);
    panel.X_raw = X.middleRows(best_start, best_len);
    panel.X = Standardizer::fit(panel.X_raw).apply(panel.X_raw);
    for (Eigen::Index r = best_start; r < best_start + best_len; ++r) {
        Quarter d = Quarter::parse(rows[data_rows[static_cast<std::size_t>(r)]][0]);
        if (!panel.dates.empty() && !(panel.dates.back() < d))
            throw std::invalid_argument("dates not strictly increasing at " + d.str());
        panel.dates.push_back(d);
    }
    return panel;
}

void write_panel_csv(const Panel& panel, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "date," << io::csv_escape(panel.target_name);
    for (const auto& s : panel.specs) out << ',' << io::csv_escape(s.name);
    out << '\n';
    for (Eigen::Index i = 0; i < panel.rows(); ++i) {
        out << panel.dates[static_cast<std::size_t>(i)].str() << ',' << io::format_double(panel.y[i]);
        for (Eigen::Index j = 0; j < panel.cols(); ++j) out << ',' << io::format_double(panel.X(i, j));
        out << '\n';
    }
    io::write_file_atomic(path, out.str());
}

Panel read_panel_csv(const std::filesystem::path& path) {
    const auto rows = io::read_csv(path);
    if (rows.size() < 2 || rows[0].size() < 2) throw std::invalid_argument("panel csv too small: " + path.string());
    Panel panel;
    panel.target_name = rows[0][1];
    for (std::size_t j = 2; j < rows[0].size(); ++j) panel.specs.push_back(SeriesSpec{rows[0][j], 1, true});
    const auto n = static_cast<Eigen::Index>(rows.size() - 1);
    const auto k = static_cast<Eigen::Index>(panel.specs.size());
    panel.y.resize(n);
    panel.X.resize(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = rows[static_cast<std::size_t>(i + 1)];
        if (static_cast<Eigen::Index>(row.size()) != k + 2)
            throw std::invalid_argument("ragged row in " + path.string());
        panel.dates.push_back(Quarter::parse(row[0]));
        panel.y[i] = io::parse_double(row[1]);
        for (Eigen::Index j = 0; j < k; ++j) panel.X(i, j) = io::parse_double(row[static_cast<std::size_t>(j + 2)]);
    }
    panel.X_raw = panel.X;
    return panel;
}

DirectDesign build_direct_design(const Matrix& X, const Vector& y, const std::vector<Quarter>& dates,
                                 int horizon) {
    const auto T = y.size();
    if (X.rows() != T || static_cast<Eigen::Index>(dates.size()) != T)
        throw std::invalid_argument("build_direct_design: dimension mismatch");
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    if (horizon >= T) throw std::invalid_argument("horizon " + std::to_string(horizon) + " >= T");
    DirectDesign d;
    d.horizon = horizon;
    d.K = X.cols() + 1;
    const auto n = T - horizon;
    d.y_h = y.tail(n);
    d.F.resize(n, d.K);
    d.F.leftCols(X.cols()) = X.topRows(n);
    d.F.col(X.cols()) = y.head(n);
    d.dates.assign(dates.begin() + horizon, dates.end());
    d.f_last.resize(d.K);
    d.f_last.head(X.cols()) = X.row(T - 1).transpose();
    d.f_last[X.cols()] = y[T - 1];
    return d;
}

DirectDesign build_direct_design(const Panel& panel, int horizon) {
    return build_direct_design(panel.X, panel.y, panel.dates, horizon);
}

}  // namespace tailqr
