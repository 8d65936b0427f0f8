#pragma once

#include "tailqr/priors.hpp"
#include "tailqr/vb.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tailqr {

struct GibbsOptions {
    int n_draws = 10000;
    int burn_in = 2000;
    std::uint64_t seed = 1;
    double intercept_precision = 1e-4;
    double c0 = 0.0;
    double d0 = 0.0;
    bool keep_nu = false;
    /// Holds nu_t = 1 and sigma = 1 fixed (reduces the sampler to Bayesian
    /// linear regression with working response y - theta).
    bool fix_latent = false;
    /// When non-empty, the stacked prior precision is held fixed and no
    /// hyperparameters are sampled.
    Vector fixed_prior_precision;
};

struct GibbsDraws {
    Matrix beta_draws;
    Vector sigma_draws;
    Matrix nu_draws;
    std::uint64_t seed = 0;
    std::vector<std::string> warnings;

    Vector mean() const;
    Vector sd() const;
};

/// Kozumi-Kobayashi Gibbs sampler for the same model as vb_fit. Supports the
/// ridge, horseshoe, normal-gamma and lasso families.
GibbsDraws gibbs_fit(const Matrix& F, const Vector& y, double q, const PriorFamily& prior, const BlockSplit& split,
                     const GibbsOptions& options = {});

struct BenchOptions {
    Eigen::Index T = 200;
    std::uint64_t seed = 7;
    double q = 0.5;
    int mcmc_draws = 8000;
    int mcmc_burn_in = 2000;
    int repeats = 1;
    bool run_mcmc = true;
};

struct BenchRow {
    Eigen::Index dim = 0;
    std::string engine;
    double seconds = 0.0;
    std::uint64_t seed = 0;
    int iterations = 0;
};

/// Synthetic regression with `dim` predictors: the first five coefficients
/// are nonzero, Gaussian noise.
void synthetic_regression(Eigen::Index T, Eigen::Index dim, std::uint64_t seed, Matrix& F, Vector& y);

/// Wall-clock seconds (median over repeats) of one ridge-prior quantile fit
/// per dimension, for VB and Gibbs.
std::vector<BenchRow> runtime_benchmark(const std::vector<Eigen::Index>& dims, const BenchOptions& options = {});

std::string bench_csv(const std::vector<BenchRow>& rows);

}  // namespace tailqr
