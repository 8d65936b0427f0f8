#pragma once

#include "tailqr/data.hpp"

#include <nlohmann/json_fwd.hpp>

#include <string>
#include <variant>
#include <vector>

namespace tailqr {

namespace basis {

struct None {};
struct Polynomial {
    int max_degree = 3;
};
struct Spline {
    std::vector<double> knot_quantiles{0.0, 0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95, 1.0};
};
/// Squared-exponential kernel w1 * exp(-w2/2 ||x - x'||^2). Non-positive w2
/// means "pick w2 by the median heuristic on the estimation window".
struct GaussianProcess {
    double w1 = 1.0;
    double w2 = 0.0;
};

}  // namespace basis

using BasisKind = std::variant<basis::None, basis::Polynomial, basis::Spline, basis::GaussianProcess>;

std::string basis_name(const BasisKind& kind);
BasisKind parse_basis(const nlohmann::json& j);
void validate_basis(const BasisKind& kind);

/// Everything needed to map a new regressor vector into the nonlinear block.
struct BasisExpansion {
    BasisKind kind;
    Matrix Z;
    Eigen::Index K = 0;

    // polynomial/spline column re-standardization
    Standardizer column_scaling;
    // spline: per covariate clamped knot vector (empty for a constant covariate)
    std::vector<std::vector<double>> knots;
    std::vector<std::string> warnings;
    // gp
    Matrix X_train;
    Matrix chol_lower;
    double w1 = 0.0;
    double w2 = 0.0;
    double jitter = 0.0;

    Eigen::Index M() const { return Z.cols(); }
};

/// Elementwise powers 2..max_degree, degree-major, re-standardized per column.
BasisExpansion build_polynomial(const Matrix& X, int max_degree);

/// Degree of the spline pieces. With nine knots a cubic clamped basis has 11
/// functions; the two outermost on each side are merged so r = 9.
inline constexpr int kSplineDegree = 3;

/// Clamped knot vector for one covariate at the given empirical quantiles.
std::vector<double> spline_knots(const Vector& column, const std::vector<double>& knot_quantiles);
/// Raw (not re-standardized) merged B-spline row at x; x is clamped to the
/// knot range. Entries are nonnegative and sum to one.
Vector spline_basis_row(const std::vector<double>& knots, double x);
/// Number of merged columns a knot vector produces.
Eigen::Index spline_columns(const std::vector<double>& knots);

BasisExpansion build_spline(const Matrix& X, const std::vector<double>& knot_quantiles);

struct KernelWidth {
    double w1 = 1.0;
    double w2 = 1.0;
};

/// w2 = 1 / median over all pairs t < s of ||x_t - x_s||^2 (duplicate rows
/// count as zero-distance pairs); w1 = 1.
KernelWidth median_heuristic(const Matrix& X);

/// Kernel matrix between the rows of A and the rows of B.
Matrix se_kernel(const Matrix& A, const Matrix& B, double w1, double w2);

/// Z is the lower Cholesky factor of K + jitter I. When jitter <= 0 the
/// jitter starts at 1e-8 w1 and grows by 10x up to 1e-4 w1.
BasisExpansion build_gp(const Matrix& X, double w1, double w2, double jitter = 0.0);

/// Builds the expansion for any kind on a training matrix.
BasisExpansion build_basis(const BasisKind& kind, const Matrix& X);

/// Nonlinear block at a new regressor vector (same column order and scaling
/// as the training matrix).
Vector evaluate_basis(const BasisExpansion& expansion, const Vector& x_new);

nlohmann::json basis_metadata(const BasisExpansion& expansion);

}  // namespace tailqr
