#include "tailqr/basis.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tailqr {

std::string basis_name(const BasisKind& kind) {
    return std::visit(
        [](const auto& k) -> std::string {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, basis::None>) return "none";
            else if constexpr (std::is_same_v<T, basis::Polynomial>) return "poly";
            else if constexpr (std::is_same_v<T, basis::Spline>) return "spline";
            else return "gp";
        },
        kind);
}

void validate_basis(const BasisKind& kind) {
    if (auto* p = std::get_if<basis::Polynomial>(&kind); p && p->max_degree < 2)
        throw std::invalid_argument("polynomial max_degree must be >= 2");
    if (auto* s = std::get_if<basis::Spline>(&kind)) {
        const auto& q = s->knot_quantiles;
        if (q.size() < 2 || q.front() != 0.0 || q.back() != 1.0 || !std::is_sorted(q.begin(), q.end()))
            throw std::invalid_argument("spline knot quantiles must be sorted and contain 0 and 1");
    }
    if (auto* g = std::get_if<basis::GaussianProcess>(&kind); g && !(g->w1 > 0.0))
        throw std::invalid_argument("gp w1 must be positive");
}

BasisKind parse_basis(const nlohmann::json& j) {
    const std::string kind = j.is_string() ? j.get<std::string>() : j.at("kind").get<std::string>();
    BasisKind out;
    if (kind == "none" || kind == "linear") {
        out = basis::None{};
    } else if (kind == "poly" || kind == "polynomial") {
        basis::Polynomial p;
        if (j.is_object()) p.max_degree = j.value("max_degree", 3);
        out = p;
    } else if (kind == "spline") {
        basis::Spline s;
        if (j.is_object() && j.contains("knot_quantiles")) s.knot_quantiles = j["knot_quantiles"].get<std::vector<double>>();
        out = s;
    } else if (kind == "gp") {
        basis::GaussianProcess g;
        if (j.is_object()) {
            g.w1 = j.value("w1", 1.0);
            g.w2 = j.value("w2", 0.0);
        }
        out = g;
    } else {
        throw std::invalid_argument("unknown basis kind '" + kind + "'");
    }
    validate_basis(out);
    return out;
}

BasisExpansion build_polynomial(const Matrix& X, int max_degree) {
    if (max_degree < 2) throw std::invalid_argument("polynomial max_degree must be >= 2");
    BasisExpansion e;
    e.kind = basis::Polynomial{max_degree};
    e.K = X.cols();
    Matrix raw(X.rows(), X.cols() * (max_degree - 1));
    for (int d = 2; d <= max_degree; ++d) raw.middleCols((d - 2) * X.cols(), X.cols()) = X.array().pow(d).matrix();
    e.column_scaling = Standardizer::fit(raw);
    e.Z = e.column_scaling.apply(raw);
    return e;
}

namespace {

// Type-7 empirical quantile of a sorted sample.
double sorted_quantile(const std::vector<double>& sorted, double prob) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// Nonzero cubic B-splines at x on span `span` (NURBS-book BasisFuns).
void nonzero_basis(const std::vector<double>& t, std::size_t span, double x, double* out) {
    constexpr int d = kSplineDegree;
    double left[d + 1], right[d + 1];
    out[0] = 1.0;
    for (int j = 1; j <= d; ++j) {
        left[j] = x - t[span + 1 - j];
        right[j] = t[span + j] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double tmp = out[r] / (right[r + 1] + left[j - r]);
            out[r] = saved + right[r + 1] * tmp;
            saved = left[j - r] * tmp;
        }
        out[j] = saved;
    }
}

}  // namespace

std::vector<double> spline_knots(const Vector& column, const std::vector<double>& knot_quantiles) {
    std::vector<double> sorted(column.data(), column.data() + column.size());
    std::sort(sorted.begin(), sorted.end());
    if (sorted.empty() || sorted.front() == sorted.back()) return {};
    std::vector<double> knots;
    for (int i = 0; i < kSplineDegree; ++i) knots.push_back(sorted.front());
    for (double q : knot_quantiles) knots.push_back(sorted_quantile(sorted, q));
    for (int i = 0; i < kSplineDegree; ++i) knots.push_back(sorted.back());
    return knots;
}

Eigen::Index spline_columns(const std::vector<double>& knots) {
    if (knots.empty()) return 0;
    const auto n = static_cast<Eigen::Index>(knots.size()) - kSplineDegree - 1;
    return n - 2;
}

Vector spline_basis_row(const std::vector<double>& t, double x) {
    if (t.empty()) return Vector(0);
    const auto n = t.size() - kSplineDegree - 1;
    const double lo = t[kSplineDegree], hi = t[n];
    x = std::clamp(x, lo, hi);
    // last span with t[span] <= x < t[span + 1]; the right end uses the last
    // nondegenerate span
    std::size_t span = kSplineDegree;
    for (std::size_t i = kSplineDegree; i < n; ++i)
        if (t[i] < t[i + 1] && t[i] <= x) span = i;
    double local[kSplineDegree + 1];
    nonzero_basis(t, span, x, local);
    Vector full = Vector::Zero(static_cast<Eigen::Index>(n));
    for (int r = 0; r <= kSplineDegree; ++r) full[static_cast<Eigen::Index>(span - kSplineDegree + r)] = local[r];
    Vector merged(static_cast<Eigen::Index>(n) - 2);
    merged[0] = full[0] + full[1];
    merged.segment(1, n - 4) = full.segment(2, n - 4);
    merged[static_cast<Eigen::Index>(n) - 3] = full[static_cast<Eigen::Index>(n) - 2] + full[static_cast<Eigen::Index>(n) - 1];
    return merged;
}

BasisExpansion build_spline(const Matrix& X, const std::vector<double>& knot_quantiles) {
    validate_basis(basis::Spline{knot_quantiles});
    if (X.rows() <= static_cast<Eigen::Index>(knot_quantiles.size()))
        throw std::invalid_argument("spline basis needs more rows than knots");
    BasisExpansion e;
    e.kind = basis::Spline{knot_quantiles};
    e.K = X.cols();
    Eigen::Index total = 0;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        e.knots.push_back(spline_knots(X.col(j), knot_quantiles));
        if (e.knots.back().empty()) e.warnings.push_back("covariate " + std::to_string(j) + " is constant; no spline columns");
        total += spline_columns(e.knots.back());
    }
    Matrix raw(X.rows(), total);
    for (Eigen::Index t = 0; t < X.rows(); ++t) {
        Eigen::Index offset = 0;
        for (Eigen::Index j = 0; j < X.cols(); ++j) {
            const Vector row = spline_basis_row(e.knots[static_cast<std::size_t>(j)], X(t, j));
            raw.row(t).segment(offset, row.size()) = row.transpose();
            offset += row.size();
        }
    }
    e.column_scaling = Standardizer::fit(raw);
    e.Z = e.column_scaling.apply(raw);
    return e;
}

KernelWidth median_heuristic(const Matrix& X) {
    const auto T = X.rows();
    if (T < 2) throw std::invalid_argument("median heuristic needs at least two rows");
    std::vector<double> d;
    d.reserve(static_cast<std::size_t>(T * (T - 1) / 2));
    for (Eigen::Index t = 0; t < T; ++t)
        for (Eigen::Index s = t + 1; s < T; ++s) d.push_back((X.row(t) - X.row(s)).squaredNorm());
    const auto n = d.size();
    auto mid = d.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(d.begin(), mid, d.end());
    double median = *mid;
    if (n % 2 == 0) median = 0.5 * (median + *std::max_element(d.begin(), mid));
    if (!(median > 0.0)) throw std::invalid_argument("degenerate inputs for kernel bandwidth");
    return KernelWidth{1.0, 1.0 / median};
}

Matrix se_kernel(const Matrix& A, const Matrix& B, double w1, double w2) {
    Matrix K(A.rows(), B.rows());
    for (Eigen::Index j = 0; j < B.rows(); ++j)
        for (Eigen::Index i = 0; i < A.rows(); ++i)
            K(i, j) = w1 * std::exp(-0.5 * w2 * (A.row(i) - B.row(j)).squaredNorm());
    return K;
}

BasisExpansion build_gp(const Matrix& X, double w1, double w2, double jitter) {
    if (!(w1 > 0.0) || !(w2 > 0.0)) throw std::invalid_argument("gp kernel needs w1, w2 > 0");
    BasisExpansion e;
    e.kind = basis::GaussianProcess{w1, w2};
    e.K = X.cols();
    e.X_train = X;
    e.w1 = w1;
    e.w2 = w2;
    const Matrix K = se_kernel(X, X, w1, w2);
    double j = jitter > 0.0 ? jitter : 1e-8 * w1;
    const double j_max = std::max(1e-4 * w1, j);
    for (;;) {
        Matrix Kj = K;
        Kj.diagonal().array() += j;
        Eigen::LLT<Matrix> llt(Kj);
        if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0) {
            e.chol_lower = llt.matrixL();
            e.jitter = j;
            break;
        }
        if (j * 10.0 > j_max * (1.0 + 1e-12)) throw std::runtime_error("gp kernel Cholesky failed after jitter escalation");
        j *= 10.0;
    }
    e.Z = e.chol_lower;
    return e;
}

BasisExpansion build_basis(const BasisKind& kind, const Matrix& X) {
    validate_basis(kind);
    return std::visit(
        [&](const auto& k) -> BasisExpansion {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, basis::None>) {
                BasisExpansion e;
                e.kind = k;
                e.K = X.cols();
                e.Z = Matrix(X.rows(), 0);
                return e;
            } else if constexpr (std::is_same_v<T, basis::Polynomial>) {
                return build_polynomial(X, k.max_degree);
            } else if constexpr (std::is_same_v<T, basis::Spline>) {
                return build_spline(X, k.knot_quantiles);
            } else {
                const double w2 = k.w2 > 0.0 ? k.w2 : median_heuristic(X).w2;
                auto e = build_gp(X, k.w1, w2);
                e.kind = basis::GaussianProcess{k.w1, k.w2};
                return e;
            }
        },
        kind);
}

Vector evaluate_basis(const BasisExpansion& e, const Vector& x_new) {
    if (x_new.size() != e.K) throw std::invalid_argument("evaluate_basis: dimension mismatch");
    return std::visit(
        [&](const auto& k) -> Vector {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, basis::None>) {
                return Vector(0);
            } else if constexpr (std::is_same_v<T, basis::Polynomial>) {
                Vector raw(e.K * (k.max_degree - 1));
                for (int d = 2; d <= k.max_degree; ++d) raw.segment((d - 2) * e.K, e.K) = x_new.array().pow(d).matrix();
                return e.column_scaling.apply(raw);
            } else if constexpr (std::is_same_v<T, basis::Spline>) {
                Vector raw(e.column_scaling.mean.size());
                Eigen::Index offset = 0;
                for (Eigen::Index j = 0; j < e.K; ++j) {
                    const Vector row = spline_basis_row(e.knots[static_cast<std::size_t>(j)], x_new[j]);
                    raw.segment(offset, row.size()) = row;
                    offset += row.size();
                }
                return e.column_scaling.apply(raw);
            } else {
                // The jitter acts as a nugget: it is added to the cross kernel
                // only for exact training replicas, so training rows map back
                // to the rows of Z.
                Vector kx(e.X_train.rows());
                for (Eigen::Index t = 0; t < e.X_train.rows(); ++t) {
                    const double d2 = (e.X_train.row(t).transpose() - x_new).squaredNorm();
                    kx[t] = e.w1 * std::exp(-0.5 * e.w2 * d2) + (d2 == 0.0 ? e.jitter : 0.0);
                }
                return e.chol_lower.triangularView<Eigen::Lower>().solve(kx);
            }
        },
        e.kind);
}

nlohmann::json basis_metadata(const BasisExpansion& e) {
    nlohmann::json j;
    j["kind"] = basis_name(e.kind);
    j["M"] = e.M();
    j["K"] = e.K;
    if (auto* p = std::get_if<basis::Polynomial>(&e.kind)) j["max_degree"] = p->max_degree;
    if (auto* s = std::get_if<basis::Spline>(&e.kind)) {
        j["knot_quantiles"] = s->knot_quantiles;
        j["degree"] = kSplineDegree;
        j["knots"] = e.knots;
    }
    if (std::holds_alternative<basis::GaussianProcess>(e.kind)) {
        j["w1"] = e.w1;
        j["w2"] = e.w2;
        j["jitter"] = e.jitter;
    }
    if (!e.warnings.empty()) j["warnings"] = e.warnings;
    return j;
}

}  // namespace tailqr
