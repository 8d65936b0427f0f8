#include "tailqr/mcmc.hpp"

#include "tailqr/gig.hpp"
#include "tailqr/io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace tailqr {

Vector GibbsDraws::mean() const { return beta_draws.colwise().mean().transpose(); }

Vector GibbsDraws::sd() const {
    const Vector m = mean();
    const double n = static_cast<double>(beta_draws.rows());
    return ((beta_draws.rowwise() - m.transpose()).colwise().squaredNorm().transpose() / (n - 1.0)).cwiseSqrt();
}

namespace {

// Prior hyperparameters of one block as Gibbs state.
struct BlockSampler {
    PriorFamily family;
    Eigen::Index n = 0;
    Vector psi;       // local variances
    double lambda = 0.01;
    Vector a;         // horseshoe auxiliaries
    double xi = 1.0;

    Vector precision() const {
        if (std::holds_alternative<prior::NormalGamma>(family) || std::holds_alternative<prior::Lasso>(family))
            return psi.cwiseInverse();
        return (psi * lambda).cwiseInverse();
    }
};

double draw_inv_gamma(double shape, double rate, std::mt19937_64& rng) {
    std::gamma_distribution<double> g(shape, 1.0 / rate);
    return 1.0 / g(rng);
}

double draw_gamma(double shape, double rate, std::mt19937_64& rng) {
    std::gamma_distribution<double> g(shape, 1.0 / rate);
    return g(rng);
}

void draw_block(BlockSampler& b, const Vector& coef, std::mt19937_64& rng) {
    if (b.n == 0) return;
    const double n = static_cast<double>(b.n);
    const Vector sq = coef.cwiseAbs2().cwiseMax(1e-300);
    if (auto* r = std::get_if<prior::Ridge>(&b.family)) {
        b.lambda = draw_inv_gamma(r->e0 + 0.5 * n, r->e1 + 0.5 * sq.sum(), rng);
    } else if (std::holds_alternative<prior::Horseshoe>(b.family)) {
        for (Eigen::Index j = 0; j < b.n; ++j) {
            b.psi[j] = draw_inv_gamma(1.0, 1.0 / b.a[j] + sq[j] / (2.0 * b.lambda), rng);
            b.a[j] = draw_inv_gamma(1.0, 1.0 + 1.0 / b.psi[j], rng);
        }
        b.lambda = draw_inv_gamma(0.5 * (n + 1.0), 1.0 / b.xi + 0.5 * sq.cwiseQuotient(b.psi).sum(), rng);
        b.xi = draw_inv_gamma(1.0, 1.0 + 1.0 / b.lambda, rng);
    } else {
        double theta = 1.0, c0 = 0.01, d0 = 0.01;
        if (auto* ng = std::get_if<prior::NormalGamma>(&b.family)) {
            theta = ng->theta;
            c0 = ng->c0;
            d0 = ng->d0;
        } else if (auto* l = std::get_if<prior::Lasso>(&b.family)) {
            c0 = l->c0;
            d0 = l->d0;
        }
        for (Eigen::Index j = 0; j < b.n; ++j) b.psi[j] = sample_gig(GigParams{theta - 0.5, theta * b.lambda, sq[j]}, rng);
        b.lambda = draw_gamma(c0 + n * theta, d0 + 0.5 * theta * b.psi.sum(), rng);
    }
}

BlockSampler make_block(const PriorFamily& family, Eigen::Index n) {
    const bool supported = std::holds_alternative<prior::Ridge>(family) || std::holds_alternative<prior::Horseshoe>(family) ||
                           std::holds_alternative<prior::NormalGamma>(family) || std::holds_alternative<prior::Lasso>(family);
    if (!supported) throw std::invalid_argument("Gibbs oracle supports ridge, horseshoe, ng and lasso only");
    BlockSampler b;
    b.family = family;
    b.n = n;
    b.psi = Vector::Ones(n);
    b.a = Vector::Ones(n);
    if (std::holds_alternative<prior::NormalGamma>(family) || std::holds_alternative<prior::Lasso>(family)) {
        b.psi.setConstant(0.01);
        b.lambda = 1.0;
    }
    return b;
}

}  // namespace

GibbsDraws gibbs_fit(const Matrix& F, const Vector& y, double q, const PriorFamily& prior, const BlockSplit& split,
                     const GibbsOptions& options) {
    const auto T = F.rows();
    const auto P = F.cols();
    if (y.size() != T || P != split.total()) throw std::invalid_argument("gibbs_fit: dimension mismatch");
    if (options.n_draws < 1 || options.burn_in < 0) throw std::invalid_argument("gibbs_fit: need n_draws >= 1");
    const bool fixed_prior = options.fixed_prior_precision.size() > 0;
    if (fixed_prior && options.fixed_prior_precision.size() != P) throw std::invalid_argument("gibbs_fit: fixed precision length");

    const auto ctx = QuantileContext::make(q);
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    GibbsDraws out;
    out.seed = options.seed;
    if (P > 2000) out.warnings.push_back("gibbs_fit: " + std::to_string(P) + " columns; dense draws will be slow");
    out.beta_draws.resize(options.n_draws, P);
    out.sigma_draws.resize(options.n_draws);
    if (options.keep_nu) out.nu_draws.resize(options.n_draws, T);

    BlockSampler lin, nonlin;
    if (!fixed_prior) {
        lin = make_block(prior, split.K);
        nonlin = make_block(prior, split.M);
    }
    Vector beta = Vector::Zero(P);
    Vector nu = Vector::Ones(T);
    double sigma = 1.0;
    Vector precision(P);
    Vector eps(P);

    const int total = options.burn_in + options.n_draws;
    for (int it = 0; it < total; ++it) {
        if (fixed_prior) {
            precision = options.fixed_prior_precision;
        } else {
            if (split.intercept) precision[0] = options.intercept_precision;
            precision.segment(split.offset(), split.K) = lin.precision();
            precision.segment(split.offset() + split.K, split.M) = nonlin.precision();
        }

        // coefficients
        const Vector w = (nu * (ctx.tau_sq * sigma)).cwiseInverse();
        const Matrix Fw = F.array().colwise() * w.array().sqrt();
        Matrix A = Matrix::Zero(P, P);
        A.selfadjointView<Eigen::Lower>().rankUpdate(Fw.transpose());
        A.diagonal() += precision;
        Eigen::LLT<Matrix> llt(A.selfadjointView<Eigen::Lower>());
        if (llt.info() != Eigen::Success) throw std::runtime_error("gibbs_fit: precision not SPD at iteration " + std::to_string(it));
        const Vector rhs = F.transpose() * w.cwiseProduct(y - ctx.theta * nu);
        for (Eigen::Index j = 0; j < P; ++j) eps[j] = normal(rng);
        beta = llt.matrixU().solve(llt.matrixL().solve(rhs) + eps);

        const Vector resid = y - F * beta;
        if (!options.fix_latent) {
            // latent scales
            const double a = (2.0 + ctx.theta * ctx.theta / ctx.tau_sq) / sigma;
            for (Eigen::Index t = 0; t < T; ++t)
                nu[t] = sample_gig(GigParams{0.5, a, resid[t] * resid[t] / (ctx.tau_sq * sigma)}, rng);
            // scale
            double rate = options.d0 + nu.sum();
            for (Eigen::Index t = 0; t < T; ++t) {
                const double e = resid[t] - ctx.theta * nu[t];
                rate += e * e / (2.0 * ctx.tau_sq * nu[t]);
            }
            sigma = 1.0 / draw_gamma(options.c0 + 1.5 * static_cast<double>(T), rate, rng);
        }

        if (!fixed_prior) {
            draw_block(lin, beta.segment(split.offset(), split.K), rng);
            draw_block(nonlin, beta.segment(split.offset() + split.K, split.M), rng);
        }

        if (!beta.allFinite() || !nu.allFinite() || !std::isfinite(sigma))
            throw std::runtime_error("gibbs_fit: non-finite draw at iteration " + std::to_string(it));
        if (it >= options.burn_in) {
            const int k = it - options.burn_in;
            out.beta_draws.row(k) = beta.transpose();
            out.sigma_draws[k] = sigma;
            if (options.keep_nu) out.nu_draws.row(k) = nu.transpose();
        }
    }
    return out;
}

void synthetic_regression(Eigen::Index T, Eigen::Index dim, std::uint64_t seed, Matrix& F, Vector& y) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    F.resize(T, dim + 1);
    F.col(0).setOnes();
    for (Eigen::Index j = 1; j <= dim; ++j)
        for (Eigen::Index t = 0; t < T; ++t) F(t, j) = normal(rng);
    Vector beta = Vector::Zero(dim + 1);
    beta[0] = 1.0;
    const double signal[] = {1.5, -1.0, 0.75, -0.5, 0.25};
    for (Eigen::Index j = 0; j < std::min<Eigen::Index>(5, dim); ++j) beta[j + 1] = signal[j];
    y = F * beta;
    for (Eigen::Index t = 0; t < T; ++t) y[t] += normal(rng);
}

std::vector<BenchRow> runtime_benchmark(const std::vector<Eigen::Index>& dims, const BenchOptions& options) {
    using clock = std::chrono::steady_clock;
    std::vector<BenchRow> rows;
    for (const auto dim : dims) {
        Matrix F;
        Vector y;
        synthetic_regression(options.T, dim, options.seed + static_cast<std::uint64_t>(dim), F, y);
        const BlockSplit split{dim, 0, true};

        auto median_seconds = [&](auto&& run) {
            std::vector<double> s;
            int iters = 0;
            for (int r = 0; r < std::max(1, options.repeats); ++r) {
                const auto t0 = clock::now();
                iters = run();
                s.push_back(std::chrono::duration<double>(clock::now() - t0).count());
            }
            std::sort(s.begin(), s.end());
            return std::pair{s[s.size() / 2], iters};
        };

        FitOptions fit;
        fit.full_cov = false;
        const auto [vb_s, vb_it] = median_seconds([&] { return vb_fit(F, y, options.q, prior::Ridge{}, split, fit).iterations; });
        rows.push_back(BenchRow{dim, "vb", vb_s, options.seed, vb_it});
        if (options.run_mcmc) {
            GibbsOptions g;
            g.n_draws = options.mcmc_draws;
            g.burn_in = options.mcmc_burn_in;
            g.seed = options.seed;
            const auto [mc_s, mc_it] = median_seconds([&] {
                gibbs_fit(F, y, options.q, prior::Ridge{}, split, g);
                return g.n_draws + g.burn_in;
            });
            rows.push_back(BenchRow{dim, "mcmc", mc_s, options.seed, mc_it});
        }
    }
    return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
    std::ostringstream out;
    out << "dim,engine,seconds,seed,iterations\n";
    for (const auto& r : rows)
        out << r.dim << ',' << r.engine << ',' << io::format_double(r.seconds) << ',' << r.seed << ',' << r.iterations << '\n';
    return out.str();
}

}  // namespace tailqr
