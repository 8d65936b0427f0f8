#include "tailqr/summary.hpp"

#include "tailqr/io.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace tailqr {

LinearSummary linearize(const Vector& quantile_series, const Matrix& X, double q, const std::vector<std::string>& names,
                        const FitOptions& options) {
    if (quantile_series.size() != X.rows()) throw std::invalid_argument("linearize: series and X have different lengths");
    if (!names.empty() && static_cast<Eigen::Index>(names.size()) != X.cols())
        throw std::invalid_argument("linearize: one name per column of X");
    Matrix F(X.rows(), X.cols() + 1);
    F.col(0).setOnes();
    F.rightCols(X.cols()) = X;
    const BlockSplit split{X.cols(), 0, true};
    const GaussianFit fit = vb_fit_gaussian(F, quantile_series, prior::Horseshoe{}, split, options);

    LinearSummary s;
    s.q = q;
    s.intercept = fit.mean[0];
    s.alpha_hat = fit.mean.tail(X.cols());
    s.sigma_eps_sq = fit.d1 / (fit.c1 - 1.0 > 0.0 ? fit.c1 - 1.0 : fit.c1);
    s.converged = fit.converged;
    sparsify(s, X, names);
    return s;
}

Vector savs(const Vector& alpha_hat, const Matrix& X) {
    if (alpha_hat.size() != X.cols()) throw std::invalid_argument("savs: dimension mismatch");
    Vector out = Vector::Zero(alpha_hat.size());
    for (Eigen::Index j = 0; j < alpha_hat.size(); ++j) {
        const double a = alpha_hat[j];
        if (a == 0.0) continue;
        const double norm_sq = X.col(j).squaredNorm();
        if (!(norm_sq > 0.0)) throw std::invalid_argument("savs: column " + std::to_string(j) + " is zero");
        const double mu = 1.0 / (a * a);
        const double shrunk = std::abs(a) * norm_sq - mu;
        if (shrunk > 0.0) out[j] = std::copysign(shrunk / norm_sq, a);
    }
    return out;
}

void sparsify(LinearSummary& summary, const Matrix& X, const std::vector<std::string>& names) {
    summary.alpha_sparse = savs(summary.alpha_hat, X);
    summary.selected.clear();
    for (Eigen::Index j = 0; j < summary.alpha_sparse.size(); ++j)
        if (summary.alpha_sparse[j] != 0.0)
            summary.selected.push_back(names.empty() ? "x" + std::to_string(j) : names[static_cast<std::size_t>(j)]);
}

double shrinkage_logdet(const PriorState& state) {
    if (state.size() == 0) return std::numeric_limits<double>::quiet_NaN();
    return -state.precision().array().log().mean();
}

ShrinkagePair shrinkage_logdet(const PriorState& linear, const PriorState& nonlinear) {
    return {shrinkage_logdet(linear), shrinkage_logdet(nonlinear)};
}

std::string summary_csv(const std::vector<LinearSummary>& summaries, const std::vector<std::string>& names) {
    std::ostringstream out;
    out << "quantile,predictor,alpha_hat,alpha_sparse,selected\n";
    for (const auto& s : summaries) {
        for (Eigen::Index j = 0; j < s.alpha_hat.size(); ++j) {
            const std::string name = names.empty() ? "x" + std::to_string(j) : names[static_cast<std::size_t>(j)];
            out << io::format_double(s.q) << ',' << io::csv_escape(name) << ',' << io::format_double(s.alpha_hat[j]) << ','
                << io::format_double(s.alpha_sparse[j]) << ',' << (s.alpha_sparse[j] != 0.0 ? 1 : 0) << '\n';
        }
    }
    return out.str();
}

}  // namespace tailqr
