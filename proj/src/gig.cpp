#include "tailqr/gig.hpp"

#include <boost/math/special_functions/bessel.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace tailqr {

namespace {

using quiet_policy = boost::math::policies::policy<
    boost::math::policies::overflow_error<boost::math::policies::ignore_error>,
    boost::math::policies::underflow_error<boost::math::policies::ignore_error>,
    boost::math::policies::denorm_error<boost::math::policies::ignore_error>,
    boost::math::policies::evaluation_error<boost::math::policies::ignore_error>>;

double log_sum_exp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// K_{n+1/2}(z) = sqrt(pi/(2z)) e^{-z} sum_k (n+k)! / (k! (n-k)!) (2z)^{-k}
double log_bessel_k_half_integer(int n, double z) {
    double acc = -std::numeric_limits<double>::infinity();
    const double log2z = std::log(2.0 * z);
    for (int k = 0; k <= n; ++k) {
        const double term = std::lgamma(n + k + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) - k * log2z;
        acc = log_sum_exp(acc, term);
    }
    return 0.5 * std::log(std::numbers::pi / (2.0 * z)) - z + acc;
}

// Hankel expansion, z >> nu^2.
double log_bessel_k_large_z(double nu, double z) {
    const double mu = 4.0 * nu * nu;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 60; ++k) {
        const double next = term * (mu - (2.0 * k - 1) * (2.0 * k - 1)) / (k * 8.0 * z);
        if (std::abs(next) > std::abs(term)) break;
        term = next;
        sum += term;
        if (std::abs(term) < 1e-17 * std::abs(sum)) break;
    }
    return 0.5 * std::log(std::numbers::pi / (2.0 * z)) - z + std::log(sum);
}

// Debye uniform expansion in the order, used when K_nu overflows for large nu.
double log_bessel_k_large_order(double nu, double z) {
    const double t = z / nu;
    const double s = std::sqrt(1.0 + t * t);
    const double p = 1.0 / s;
    const double eta = s + std::log(t / (1.0 + s));
    const double p2 = p * p;
    const double u1 = p * (3.0 - 5.0 * p2) / 24.0;
    const double u2 = p2 * (81.0 - 462.0 * p2 + 385.0 * p2 * p2) / 1152.0;
    const double u3 = p * p2 * (30375.0 - 369603.0 * p2 + 765765.0 * p2 * p2 - 425425.0 * p2 * p2 * p2) / 414720.0;
    const double series = 1.0 - u1 / nu + u2 / (nu * nu) - u3 / (nu * nu * nu);
    return 0.5 * std::log(std::numbers::pi / (2.0 * nu)) - nu * eta - 0.25 * std::log(1.0 + t * t) +
           std::log(series);
}

}  // namespace

double log_bessel_k(double nu, double z) {
    if (!(z > 0.0) || !std::isfinite(z)) throw std::domain_error("log_bessel_k: z must be positive and finite");
    nu = std::abs(nu);
    const double twice = 2.0 * nu;
    if (std::abs(twice - std::round(twice)) < 1e-14 && static_cast<long>(std::round(twice)) % 2 == 1 && nu < 60.0)
        return log_bessel_k_half_integer(static_cast<int>(std::round(nu - 0.5)), z);
    if (z > 50.0 && z > nu * nu) return log_bessel_k_large_z(nu, z);
    const double k = boost::math::cyl_bessel_k(nu, z, quiet_policy());
    if (std::isfinite(k) && k > 1e-290) return std::log(k);
    if (nu > 1.0) return log_bessel_k_large_order(nu, z);
    return log_bessel_k_large_z(nu, z);
}

double gig_log_kernel(const GigParams& gig, double x) {
    if (x <= 0.0) return -std::numeric_limits<double>::infinity();
    return (gig.p - 1.0) * std::log(x) - 0.5 * (gig.a * x + gig.b / x);
}

double gig_moment(const GigParams& gig, double j) {
    if (!(gig.a > 0.0) || !(gig.b > 0.0) || !std::isfinite(gig.a) || !std::isfinite(gig.b) || !std::isfinite(gig.p))
        throw std::domain_error("gig_moment: need finite a > 0, b > 0 (a=" + std::to_string(gig.a) +
                                ", b=" + std::to_string(gig.b) + ")");
    if (j == 0.0) return 1.0;
    const double omega = std::sqrt(gig.a * gig.b);
    const double log_ratio = log_bessel_k(gig.p + j, omega) - log_bessel_k(gig.p, omega);
    return std::exp(0.5 * j * (std::log(gig.b) - std::log(gig.a)) + log_ratio);
}

namespace {

// Standardized two-parameter form: density proportional to
// x^(lambda-1) exp(-omega/2 (x + 1/x)), lambda >= 0.
double log_f(double lambda, double omega, double x) {
    return (lambda - 1.0) * std::log(x) - 0.5 * omega * (x + 1.0 / x);
}

double standard_mode(double lambda, double omega) {
    if (lambda >= 1.0) return (std::sqrt((lambda - 1.0) * (lambda - 1.0) + omega * omega) + (lambda - 1.0)) / omega;
    return omega / (std::sqrt((1.0 - lambda) * (1.0 - lambda) + omega * omega) + (1.0 - lambda));
}

double uniform(std::mt19937_64& rng) {
    // (0, 1): never returns 0 so logs stay finite
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double rou_shift(double lambda, double omega, std::mt19937_64& rng) {
    const double m = standard_mode(lambda, omega);
    const double lfm = log_f(lambda, omega, m);
    // extremes of (x - m) sqrt(f(x)) solve x^3 + a x^2 + b x + c = 0
    const double a = -(2.0 * (lambda + 1.0) / omega + m);
    const double b = 2.0 * (lambda - 1.0) * m / omega - 1.0;
    const double c = m;
    const double p = b - a * a / 3.0;
    const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    const double fi = std::acos(std::clamp(-q / (2.0 * std::sqrt(-p * p * p / 27.0)), -1.0, 1.0));
    const double fak = 2.0 * std::sqrt(-p / 3.0);
    const double x_plus = fak * std::cos(fi / 3.0) - a / 3.0;
    const double x_minus = fak * std::cos(fi / 3.0 + 4.0 / 3.0 * std::numbers::pi) - a / 3.0;
    const double v_plus = (x_plus - m) * std::exp(0.5 * (log_f(lambda, omega, x_plus) - lfm));
    const double v_minus = (x_minus - m) * std::exp(0.5 * (log_f(lambda, omega, x_minus) - lfm));
    for (;;) {
        const double u = uniform(rng);
        const double v = v_minus + uniform(rng) * (v_plus - v_minus);
        const double x = v / u + m;
        if (x <= 0.0) continue;
        if (2.0 * std::log(u) <= log_f(lambda, omega, x) - lfm) return x;
    }
}

double rou_noshift(double lambda, double omega, std::mt19937_64& rng) {
    const double m = standard_mode(lambda, omega);
    const double lfm = log_f(lambda, omega, m);
    const double xv = ((lambda + 1.0) + std::sqrt((lambda + 1.0) * (lambda + 1.0) + omega * omega)) / omega;
    const double v_max = xv * std::exp(0.5 * (log_f(lambda, omega, xv) - lfm));
    for (;;) {
        const double u = uniform(rng);
        const double x = uniform(rng) * v_max / u;
        if (2.0 * std::log(u) <= log_f(lambda, omega, x) - lfm) return x;
    }
}

// 0 <= lambda < 1, small omega: constant hat on (0, x0), x^(lambda-1) hat up to
// 2/omega, exponential tail beyond.
double three_piece_hat(double lambda, double omega, std::mt19937_64& rng) {
    const double m = standard_mode(lambda, omega);
    const double x0 = omega / (1.0 - lambda);
    const double xs = std::max(x0, 2.0 / omega);
    const double k0 = std::exp(log_f(lambda, omega, m));
    const double a0 = k0 * x0;
    double k1 = 0.0, a1 = 0.0;
    if (x0 < 2.0 / omega) {
        k1 = std::exp(-omega);
        a1 = lambda == 0.0 ? k1 * std::log(2.0 / (omega * omega))
                           : k1 / lambda * (std::pow(2.0 / omega, lambda) - std::pow(x0, lambda));
    }
    const double k2 = std::pow(xs, lambda - 1.0);
    const double a2 = k2 * 2.0 * std::exp(-omega * xs / 2.0) / omega;
    const double total = a0 + a1 + a2;
    for (;;) {
        double v = total * uniform(rng);
        double x = 0.0, log_hat = 0.0;
        if (v <= a0) {
            x = x0 * v / a0;
            log_hat = std::log(k0);
        } else if ((v -= a0) <= a1) {
            if (lambda == 0.0) {
                x = omega * std::exp(std::exp(omega) * v);
                log_hat = std::log(k1 / x);
            } else {
                x = std::pow(std::pow(x0, lambda) + lambda / k1 * v, 1.0 / lambda);
                log_hat = std::log(k1) + (lambda - 1.0) * std::log(x);
            }
        } else {
            v -= a1;
            x = -2.0 / omega * std::log(std::exp(-omega / 2.0 * xs) - omega / (2.0 * k2) * v);
            log_hat = std::log(k2) - omega / 2.0 * x;
        }
        if (!(x > 0.0) || !std::isfinite(x)) continue;
        if (std::log(uniform(rng)) + log_hat <= log_f(lambda, omega, x)) return x;
    }
}

}  // namespace

double sample_gig(const GigParams& gig, std::mt19937_64& rng) {
    if (!(gig.a >= 0.0) || !(gig.b >= 0.0) || (gig.a == 0.0 && gig.b == 0.0))
        throw std::domain_error("sample_gig: invalid parameters");
    // boundary cases: Gamma (b -> 0) and inverse Gamma (a -> 0)
    if (gig.b < 1e-300 || (gig.a > 0.0 && gig.b / gig.a < 1e-300 && gig.p > 0.0)) {
        if (gig.p <= 0.0) throw std::domain_error("sample_gig: b = 0 needs p > 0");
        std::gamma_distribution<double> g(gig.p, 2.0 / gig.a);
        return g(rng);
    }
    if (gig.a < 1e-300) {
        if (gig.p >= 0.0) throw std::domain_error("sample_gig: a = 0 needs p < 0");
        std::gamma_distribution<double> g(-gig.p, 2.0 / gig.b);
        return 1.0 / g(rng);
    }
    const double lambda = std::abs(gig.p);
    const double omega = std::sqrt(gig.a * gig.b);
    const double alpha = std::sqrt(gig.b / gig.a);
    double x;
    if (lambda > 2.0 || omega > 3.0) {
        x = rou_shift(lambda, omega, rng);
    } else if (lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2) {
        x = rou_noshift(lambda, omega, rng);
    } else {
        x = three_piece_hat(lambda, omega, rng);
    }
    // negative orders: reciprocal of the positive-order draw
    return gig.p < 0.0 ? alpha / x : alpha * x;
}

}  // namespace tailqr
