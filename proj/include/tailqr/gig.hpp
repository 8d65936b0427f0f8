#pragma once

#include <random>

namespace tailqr {

/// log K_nu(z) for z > 0, finite over z in [1e-12, 1e12] and moderate |nu|.
double log_bessel_k(double nu, double z);

/// Generalized inverse Gaussian with density proportional to
///   x^(p-1) exp(-(a x + b / x) / 2),  x > 0.
/// This is the convention under which E(x^j) = (b/a)^(j/2) K_{p+j}(sqrt(ab)) / K_p(sqrt(ab)).
struct GigParams {
    double p = 0.5;
    double a = 1.0;
    double b = 1.0;
};

/// E(x^j) under GIG(p, a, b), evaluated through log Bessel ratios.
double gig_moment(const GigParams& gig, double j);

/// Order-1/2 moment used by the latent ALD scales.
inline double gig_moment(double j, double a, double b) { return gig_moment(GigParams{0.5, a, b}, j); }

/// Unnormalized log density, for rejection tests and quadrature.
double gig_log_kernel(const GigParams& gig, double x);

/// Draws from GIG(p, a, b) with the ratio-of-uniforms family of
/// Hoermann & Leydold (2014): mode-shifted ROU for large p or omega, plain ROU
/// in the middle range, and a three-piece hat for small omega with p < 1.
double sample_gig(const GigParams& gig, std::mt19937_64& rng);

}  // namespace tailqr
