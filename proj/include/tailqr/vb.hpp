#pragma once

#include "tailqr/data.hpp"
#include "tailqr/priors.hpp"

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace tailqr {

/// Constants of the normal-exponential mixture representation of the
/// asymmetric Laplace error at quantile q.
struct QuantileContext {
    double q = 0.5;
    double theta = 0.0;
    double tau_sq = 8.0;

    static QuantileContext make(double q);
};

struct MixtureConstants {
    double theta;
    double tau_sq;
};

/// theta = (1 - 2q) / (q (1 - q)), tau^2 = 2 / (q (1 - q)).
MixtureConstants ald_mixture_constants(double q);

/// Column layout of a regression: optional unpenalized intercept first, then
/// K linear columns, then M basis columns.
struct BlockSplit {
    Eigen::Index K = 0;
    Eigen::Index M = 0;
    bool intercept = true;

    Eigen::Index offset() const { return intercept ? 1 : 0; }
    Eigen::Index total() const { return offset() + K + M; }
};

/// Gaussian factor of the coefficients. `fitted_var[t]` is f_t' Sigma f_t.
struct CoefficientPosterior {
    Vector mean;
    Vector cov_diag;
    Vector fitted_var;
    /// Filled only when requested.
    Matrix cov;
};

/// Posterior of b under precision F' diag(w) F + diag(prior_precision) with
/// mean (precision)^-1 F' z. Uses a P x P Cholesky when P <= T and the
/// Woodbury identity with a T x T Cholesky otherwise.
CoefficientPosterior gaussian_posterior(const Matrix& F, const Vector& w, const Vector& z, const Vector& prior_precision,
                                        bool full_cov = false);

/// Gaussian coefficient update under the ALD mixture.
CoefficientPosterior update_coefficients(const Matrix& F, const Vector& y, const QuantileContext& ctx,
                                         const Vector& E_inv_nu, double E_inv_sigma, const Vector& prior_precision,
                                         bool full_cov = false);

/// diag(F Sigma F').
Vector fitted_variance(const Matrix& F, const Matrix& Sigma);

struct LatentScales {
    Vector E_nu;
    Vector E_inv_nu;
};

/// Floor applied to the GIG B parameter of each latent scale.
inline constexpr double kLatentScaleFloor = 1e-10;

/// GIG(1/2, A, B_t) moments of the latent scales.
LatentScales update_latent_scales(const Matrix& F, const Vector& y, const QuantileContext& ctx, const Vector& E_beta,
                                  const Vector& fitted_var, double E_inv_sigma);

struct SigmaUpdate {
    double c1;
    double d1;
    double E_inv_sigma;
};

/// Gamma update of 1/sigma.
SigmaUpdate update_sigma(const Matrix& F, const Vector& y, const QuantileContext& ctx, const Vector& E_beta,
                         const Vector& fitted_var, const Vector& E_nu, const Vector& E_inv_nu, double c0, double d0);

struct FitOptions {
    int max_iter = 1000;
    double tol = 1e-6;
    double intercept_precision = 1e-4;
    double c0 = 0.0;
    double d0 = 0.0;
    bool full_cov = true;
    /// Minnesota inputs for the linear block; computed from the data with no
    /// own lag when empty.
    Vector linear_scale;
    std::vector<bool> own_lag;
};

struct VbState {
    BlockSplit split;
    double q = 0.5;
    Vector E_beta;
    Matrix Sigma_beta;
    Vector cov_diag;
    Vector E_nu;
    Vector E_inv_nu;
    double E_inv_sigma = 1.0;
    double c1 = 0.0;
    double d1 = 0.0;
    PriorState prior_linear;
    PriorState prior_nonlinear;
    double elbo_proxy = 0.0;
    double last_change = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Prior precision of the full stacked vector, intercept included.
Vector stacked_precision(const VbState& state, double intercept_precision);

/// Coordinate ascent until the largest change in E_beta is below tol.
/// Non-convergence is reported through `converged`; a non-finite update throws.
/// With `start`, iteration resumes from that state.
VbState vb_fit(const Matrix& F, const Vector& y, double q, const PriorFamily& prior, const BlockSplit& split,
               const FitOptions& options = {}, const VbState* start = nullptr);

/// Same machinery with a Gaussian likelihood (latent scales fixed at one,
/// no asymmetry) and an inverse-Gamma error variance.
struct GaussianFit {
    BlockSplit split;
    Vector mean;
    Vector cov_diag;
    double E_inv_sigma_sq = 1.0;
    double c1 = 0.0;
    double d1 = 0.0;
    PriorState prior_linear;
    PriorState prior_nonlinear;
    int iterations = 0;
    bool converged = false;
};

GaussianFit vb_fit_gaussian(const Matrix& F, const Vector& y, const PriorFamily& prior, const BlockSplit& split,
                            const FitOptions& options = {});

double pinball_loss(double residual, double q);

nlohmann::json vb_state_json(const VbState& state);

/// Little-endian float64 row-major with a 16-byte header: 8-byte magic
/// "TQRMAT01", uint32 rows, uint32 cols.
void write_matrix_binary(const Matrix& m, const std::filesystem::path& path);
Matrix read_matrix_binary(const std::filesystem::path& path);

}  // namespace tailqr
