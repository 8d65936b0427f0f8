#pragma once

#include "tailqr/priors.hpp"
#include "tailqr/vb.hpp"

#include <string>
#include <vector>

namespace tailqr {

struct LinearSummary {
    double q = 0.5;
    double intercept = 0.0;
    Vector alpha_hat;
    Vector alpha_sparse;
    double sigma_eps_sq = 1.0;
    std::vector<std::string> selected;
    bool converged = false;
};

/// Horseshoe regression of a quantile series on X (intercept added) through
/// the Gaussian path of the VB engine. Names label the columns of X.
LinearSummary linearize(const Vector& quantile_series, const Matrix& X, double q = 0.5,
                        const std::vector<std::string>& names = {}, const FitOptions& options = {});

/// Signal adaptive variable selection with penalty |alpha_j|^-2.
Vector savs(const Vector& alpha_hat, const Matrix& X);

/// Fills alpha_sparse and selected.
void sparsify(LinearSummary& summary, const Matrix& X, const std::vector<std::string>& names);

/// Mean log prior variance of a block (NaN when the block is empty).
double shrinkage_logdet(const PriorState& state);

struct ShrinkagePair {
    double linear;
    double nonlinear;
};
ShrinkagePair shrinkage_logdet(const PriorState& linear, const PriorState& nonlinear);

/// quantile, predictor, alpha_hat, alpha_sparse, selected
std::string summary_csv(const std::vector<LinearSummary>& summaries, const std::vector<std::string>& names);

}  // namespace tailqr
