#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace tailqr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Calendar quarter, ordered by its absolute ordinal (year * 4 + quarter - 1).
struct Quarter {
    int year = 0;
    int q = 1;

    int ordinal() const { return year * 4 + (q - 1); }
    static Quarter from_ordinal(int ordinal);
    Quarter shifted(int quarters) const { return from_ordinal(ordinal() + quarters); }

    /// Accepts "1991Q2", "1991-04-01" (ISO), and "4/1/1991" (month/day/year).
    static Quarter parse(const std::string& text);
    std::string str() const;

    friend bool operator==(const Quarter&, const Quarter&) = default;
    friend auto operator<=>(const Quarter& a, const Quarter& b) { return a.ordinal() <=> b.ordinal(); }
};

/// FRED-QD transformation code.
struct SeriesSpec {
    std::string name;
    int tcode = 1;
    bool include = true;
};

std::vector<SeriesSpec> read_series_specs(const std::filesystem::path& path);

/// Applies one transformation code to a raw series. The output has the same
/// length; entries that the transform consumes (leading differences) are NaN.
Vector apply_tcode(const Vector& raw, int tcode);

/// Column-wise mean and standard deviation used to standardize a block.
struct Standardizer {
    Vector mean;
    Vector scale;

    static Standardizer fit(const Matrix& X);
    Matrix apply(const Matrix& X) const;
    Vector apply(const Vector& x) const;
};

struct PanelOptions {
    std::string target = "GDPC1";
    /// Target is log-differenced and multiplied by this factor (400 gives
    /// annualized quarterly growth in percent).
    double target_scale = 400.0;
    int min_rows = 40;
};

struct Panel {
    std::vector<Quarter> dates;
    std::string target_name;
    Vector y;
    /// Transformed predictors before standardization.
    Matrix X_raw;
    /// Full-sample standardized predictors.
    Matrix X;
    std::vector<SeriesSpec> specs;

    Eigen::Index rows() const { return y.size(); }
    Eigen::Index cols() const { return X.cols(); }
    Eigen::Index index_of(const Quarter& date) const;

    /// Keeps rows with dates in [first, last].
    Panel slice(const Quarter& first, const Quarter& last) const;
};

/// Reads the CSV, applies per-series transforms, trims leading and trailing
/// rows with missing values and standardizes the predictors.
Panel load_panel(const std::filesystem::path& csv_path, const std::filesystem::path& spec_path,
                 const PanelOptions& options = {});

/// Same as load_panel with specs already in memory.
Panel load_panel(const std::filesystem::path& csv_path, const std::vector<SeriesSpec>& specs,
                 const PanelOptions& options = {});

/// Audit output: date, target, then the standardized predictors.
void write_panel_csv(const Panel& panel, const std::filesystem::path& path);
/// Reads a file produced by write_panel_csv without transforming anything.
Panel read_panel_csv(const std::filesystem::path& path);

/// Direct-forecast regression for one horizon. Row i pairs y at dates[i]
/// with regressors dated dates[i] - horizon.
struct DirectDesign {
    int horizon = 1;
    std::vector<Quarter> dates;
    Vector y_h;
    /// Predictors lagged by horizon; the last column is the lagged target.
    Matrix F;
    Eigen::Index K = 0;
    /// Regressors at the final panel date, used to forecast dates.back() + horizon.
    Vector f_last;
};

DirectDesign build_direct_design(const Matrix& X, const Vector& y, const std::vector<Quarter>& dates,
                                 int horizon);
DirectDesign build_direct_design(const Panel& panel, int horizon);

}  // namespace tailqr
