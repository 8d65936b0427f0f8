#include "tailqr/vb.hpp"

#include "tailqr/gig.hpp"
#include "tailqr/io.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numbers>
#include <stdexcept>

namespace tailqr {

MixtureConstants ald_mixture_constants(double q) {
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("quantile must lie in (0, 1)");
    const double v = q * (1.0 - q);
    return {(1.0 - 2.0 * q) / v, 2.0 / v};
}

QuantileContext QuantileContext::make(double q) {
    const auto c = ald_mixture_constants(q);
    return QuantileContext{q, c.theta, c.tau_sq};
}

CoefficientPosterior gaussian_posterior(const Matrix& F, const Vector& w, const Vector& z, const Vector& prior_precision,
                                        bool full_cov) {
    const auto T = F.rows();
    const auto P = F.cols();
    if (w.size() != T || z.size() != T || prior_precision.size() != P)
        throw std::invalid_argument("gaussian_posterior: dimension mismatch");
    if ((prior_precision.array() <= 0.0).any()) throw std::invalid_argument("gaussian_posterior: prior precision must be positive");

    CoefficientPosterior out;
    if (P <= T) {
        const Matrix Fw = F.array().colwise() * w.array().sqrt();
        Matrix A = Matrix::Zero(P, P);
        A.selfadjointView<Eigen::Lower>().rankUpdate(Fw.transpose());
        A.diagonal() += prior_precision;
        Eigen::LLT<Matrix> llt(A.selfadjointView<Eigen::Lower>());
        if (llt.info() != Eigen::Success) throw std::runtime_error("coefficient precision is not positive definite");
        out.mean = llt.solve(F.transpose() * z);
        const Matrix Linv = llt.matrixL().solve(Matrix::Identity(P, P));
        out.cov_diag = Linv.colwise().squaredNorm().transpose();
        out.fitted_var = (Linv * F.transpose()).colwise().squaredNorm().transpose();
        if (full_cov) out.cov = Linv.transpose() * Linv;
    } else {
        const Vector d_inv = prior_precision.cwiseInverse();
        const Matrix G = F * d_inv.asDiagonal();
        Matrix KT = Matrix::Zero(T, T);
        KT.selfadjointView<Eigen::Lower>().rankUpdate(F * d_inv.cwiseSqrt().asDiagonal());
        KT = KT.selfadjointView<Eigen::Lower>();
        Matrix S = KT;
        S.diagonal() += w.cwiseInverse();
        Eigen::LLT<Matrix> llt(S);
        if (llt.info() != Eigen::Success) throw std::runtime_error("dual coefficient system is not positive definite");
        out.mean = d_inv.cwiseProduct(F.transpose() * (z - llt.solve(KT * z)));
        const Matrix Linv = llt.matrixL().solve(Matrix::Identity(T, T));
        const Matrix V = Linv.triangularView<Eigen::Lower>() * G;
        out.cov_diag = d_inv - V.colwise().squaredNorm().transpose();
        // F Sigma F' = W^-1 - W^-1 S^-1 W^-1
        const Vector w_inv = w.cwiseInverse();
        out.fitted_var = w_inv - w_inv.cwiseAbs2().cwiseProduct(Linv.colwise().squaredNorm().transpose());
        if (full_cov) {
            out.cov = -V.transpose() * V;
            out.cov.diagonal() += d_inv;
        }
        // cancellation guard: variances are positive by construction
        out.cov_diag = out.cov_diag.cwiseMax(1e-300);
        out.fitted_var = out.fitted_var.cwiseMax(0.0);
    }
    return out;
}

CoefficientPosterior update_coefficients(const Matrix& F, const Vector& y, const QuantileContext& ctx,
                                         const Vector& E_inv_nu, double E_inv_sigma, const Vector& prior_precision,
                                         bool full_cov) {
    if (y.size() != F.rows() || E_inv_nu.size() != F.rows())
        throw std::invalid_argument("update_coefficients: dimension mismatch");
    const Vector w = E_inv_nu * (E_inv_sigma / ctx.tau_sq);
    const Vector z = (E_inv_nu.cwiseProduct(y).array() - ctx.theta).matrix() * (E_inv_sigma / ctx.tau_sq);
    return gaussian_posterior(F, w, z, prior_precision, full_cov);
}

Vector fitted_variance(const Matrix& F, const Matrix& Sigma) {
    return (F * Sigma).cwiseProduct(F).rowwise().sum();
}

LatentScales update_latent_scales(const Matrix& F, const Vector& y, const QuantileContext& ctx, const Vector& E_beta,
                                  const Vector& fitted_var, double E_inv_sigma) {
    const auto T = F.rows();
    const double A = E_inv_sigma * (2.0 + ctx.theta * ctx.theta / ctx.tau_sq);
    if (!std::isfinite(A) || !(A > 0.0)) throw std::runtime_error("update_latent_scales: non-finite A");
    const Vector resid = y - F * E_beta;
    LatentScales out{Vector(T), Vector(T)};
    for (Eigen::Index t = 0; t < T; ++t) {
        const double B = E_inv_sigma / ctx.tau_sq * (resid[t] * resid[t] + fitted_var[t]);
        if (!std::isfinite(B)) throw std::runtime_error("update_latent_scales: non-finite B");
        const double Bf = std::max(B, kLatentScaleFloor);
        out.E_nu[t] = gig_moment(1.0, A, Bf);
        out.E_inv_nu[t] = gig_moment(-1.0, A, Bf);
    }
    return out;
}

SigmaUpdate update_sigma(const Matrix& F, const Vector& y, const QuantileContext& ctx, const Vector& E_beta,
                         const Vector& fitted_var, const Vector& E_nu, const Vector& E_inv_nu, double c0, double d0) {
    const auto T = F.rows();
    if (T == 0) return {c0, d0, d0 > 0.0 ? c0 / d0 : std::numeric_limits<double>::quiet_NaN()};
    const Vector resid = y - F * E_beta;
    double quad = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) {
        quad += E_inv_nu[t] * resid[t] * resid[t] - 2.0 * ctx.theta * resid[t] + E_nu[t] * ctx.theta * ctx.theta +
                E_inv_nu[t] * fitted_var[t];
    }
    const double c1 = c0 + 1.5 * static_cast<double>(T);
    const double d1 = d0 + E_nu.sum() + quad / (2.0 * ctx.tau_sq);
    if (!(d1 > 0.0) || !std::isfinite(d1)) throw std::runtime_error("update_sigma: d1 <= 0 (upstream corruption)");
    return {c1, d1, c1 / d1};
}

namespace {

Vector coefficient_sq(const CoefficientPosterior& c, Eigen::Index offset, Eigen::Index n) {
    return c.mean.segment(offset, n).cwiseAbs2() + c.cov_diag.segment(offset, n);
}

Vector full_precision(const BlockSplit& split, double intercept_precision, const PriorState& lin, const PriorState& nonlin) {
    Vector out(split.total());
    if (split.intercept) out[0] = intercept_precision;
    out.segment(split.offset(), split.K) = lin.precision();
    out.segment(split.offset() + split.K, split.M) = nonlin.precision();
    return out;
}

void check_inputs(const Matrix& F, const Vector& y, const BlockSplit& split) {
    if (F.rows() != y.size()) throw std::invalid_argument("vb_fit: F and y differ in length");
    if (F.cols() != split.total()) throw std::invalid_argument("vb_fit: column count does not match block split");
    if (F.rows() < 5) throw std::invalid_argument("vb_fit: need at least 5 observations");
    if (!F.allFinite() || !y.allFinite()) throw std::invalid_argument("vb_fit: non-finite input");
}

std::pair<PriorState, PriorState> initial_priors(const Matrix& F, const Vector& y, const PriorFamily& prior,
                                                 const BlockSplit& split, const FitOptions& options) {
    Vector lin_scale = options.linear_scale;
    std::vector<bool> own = options.own_lag;
    if (is_minnesota(prior) && lin_scale.size() == 0)
        lin_scale = split.K > 0 ? minnesota_scales(y, F.middleCols(split.offset(), split.K)) : Vector(0);
    if (is_minnesota(prior) && own.empty()) own.assign(static_cast<std::size_t>(split.K), false);
    auto lin = init_prior(prior, Block::Linear, split.K, lin_scale, own);
    auto nonlin = init_prior(prior, Block::Nonlinear, split.M, Vector::Ones(split.M));
    return {std::move(lin), std::move(nonlin)};
}

void require_finite(const Vector& v, const char* update) {
    if (!v.allFinite()) throw std::runtime_error(std::string("vb_fit: NaN in ") + update);
}

}  // namespace

Vector stacked_precision(const VbState& state, double intercept_precision) {
    return full_precision(state.split, intercept_precision, state.prior_linear, state.prior_nonlinear);
}

double pinball_loss(double residual, double q) { return residual * (q - (residual < 0.0 ? 1.0 : 0.0)); }

VbState vb_fit(const Matrix& F, const Vector& y, double q, const PriorFamily& prior, const BlockSplit& split,
               const FitOptions& options, const VbState* start) {
    check_inputs(F, y, split);
    const auto ctx = QuantileContext::make(q);
    const auto T = F.rows();

    VbState s;
    if (start) {
        s = *start;
        if (s.E_beta.size() != split.total() || s.E_inv_nu.size() != T) throw std::invalid_argument("vb_fit: start state has wrong shape");
        s.converged = false;
        s.iterations = 0;
    } else {
        s.E_beta = Vector::Zero(split.total());
        s.E_nu = Vector::Ones(T);
        s.E_inv_nu = Vector::Ones(T);
        s.E_inv_sigma = 1.0;
        std::tie(s.prior_linear, s.prior_nonlinear) = initial_priors(F, y, prior, split, options);
    }
    s.split = split;
    s.q = q;

    CoefficientPosterior coef;
    for (int it = 1; it <= options.max_iter; ++it) {
        const Vector B0 = full_precision(split, options.intercept_precision, s.prior_linear, s.prior_nonlinear);
        coef = update_coefficients(F, y, ctx, s.E_inv_nu, s.E_inv_sigma, B0);
        require_finite(coef.mean, "update_coefficients");
        require_finite(coef.cov_diag, "update_coefficients");

        auto scales = update_latent_scales(F, y, ctx, coef.mean, coef.fitted_var, s.E_inv_sigma);
        require_finite(scales.E_nu, "update_latent_scales");
        require_finite(scales.E_inv_nu, "update_latent_scales");

        const auto sig = update_sigma(F, y, ctx, coef.mean, coef.fitted_var, scales.E_nu, scales.E_inv_nu, options.c0, options.d0);
        if (!std::isfinite(sig.E_inv_sigma)) throw std::runtime_error("vb_fit: NaN in update_sigma");

        s.prior_linear = update_prior(s.prior_linear, coefficient_sq(coef, split.offset(), split.K));
        s.prior_nonlinear = update_prior(s.prior_nonlinear, coefficient_sq(coef, split.offset() + split.K, split.M));

        s.last_change = (coef.mean - s.E_beta).cwiseAbs().maxCoeff();
        s.E_beta = coef.mean;
        s.cov_diag = coef.cov_diag;
        s.E_nu = std::move(scales.E_nu);
        s.E_inv_nu = std::move(scales.E_inv_nu);
        s.E_inv_sigma = sig.E_inv_sigma;
        s.c1 = sig.c1;
        s.d1 = sig.d1;
        s.iterations = it;
        if (s.last_change < options.tol) {
            s.converged = true;
            break;
        }
    }

    if (options.full_cov) {
        const Vector B0 = full_precision(split, options.intercept_precision, s.prior_linear, s.prior_nonlinear);
        coef = update_coefficients(F, y, ctx, s.E_inv_nu, s.E_inv_sigma, B0, true);
        s.Sigma_beta = std::move(coef.cov);
    }

    // plug-in expected complete-data log-likelihood
    const Vector resid = y - F * s.E_beta;
    const Vector fv = coef.fitted_var.size() == T ? coef.fitted_var : Vector::Zero(T);
    double ll = 0.0;
    const double log_inv_sigma = std::log(s.E_inv_sigma);
    for (Eigen::Index t = 0; t < T; ++t) {
        ll += -0.5 * std::log(2.0 * std::numbers::pi * ctx.tau_sq) + 0.5 * log_inv_sigma + 0.5 * std::log(s.E_inv_nu[t]) -
              s.E_inv_sigma / (2.0 * ctx.tau_sq) *
                  (s.E_inv_nu[t] * (resid[t] * resid[t] + fv[t]) - 2.0 * ctx.theta * resid[t] + ctx.theta * ctx.theta * s.E_nu[t]) +
              log_inv_sigma - s.E_inv_sigma * s.E_nu[t];
    }
    s.elbo_proxy = ll;
    return s;
}

GaussianFit vb_fit_gaussian(const Matrix& F, const Vector& y, const PriorFamily& prior, const BlockSplit& split,
                            const FitOptions& options) {
    check_inputs(F, y, split);
    const auto T = F.rows();
    GaussianFit g;
    g.split = split;
    std::tie(g.prior_linear, g.prior_nonlinear) = initial_priors(F, y, prior, split, options);
    g.mean = Vector::Zero(split.total());
    g.E_inv_sigma_sq = 1.0;
    for (int it = 1; it <= options.max_iter; ++it) {
        const Vector B0 = full_precision(split, options.intercept_precision, g.prior_linear, g.prior_nonlinear);
        const Vector w = Vector::Constant(T, g.E_inv_sigma_sq);
        const auto coef = gaussian_posterior(F, w, y * g.E_inv_sigma_sq, B0);
        require_finite(coef.mean, "gaussian coefficient update");
        const Vector resid = y - F * coef.mean;
        g.c1 = options.c0 + 0.5 * static_cast<double>(T);
        g.d1 = options.d0 + 0.5 * (resid.squaredNorm() + coef.fitted_var.sum());
        if (!(g.d1 > 0.0)) throw std::runtime_error("vb_fit_gaussian: non-positive error scale");
        g.E_inv_sigma_sq = g.c1 / g.d1;
        g.prior_linear = update_prior(g.prior_linear, coefficient_sq(coef, split.offset(), split.K));
        g.prior_nonlinear = update_prior(g.prior_nonlinear, coefficient_sq(coef, split.offset() + split.K, split.M));
        const double change = (coef.mean - g.mean).cwiseAbs().maxCoeff();
        g.mean = coef.mean;
        g.cov_diag = coef.cov_diag;
        g.iterations = it;
        if (change < options.tol) {
            g.converged = true;
            break;
        }
    }
    return g;
}

nlohmann::json vb_state_json(const VbState& s) {
    auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    nlohmann::json j;
    j["q"] = s.q;
    j["intercept"] = s.split.intercept;
    j["K"] = s.split.K;
    j["M"] = s.split.M;
    j["E_beta"] = vec(s.E_beta);
    j["cov_diag"] = vec(s.cov_diag);
    j["E_inv_sigma"] = s.E_inv_sigma;
    j["c1"] = s.c1;
    j["d1"] = s.d1;
    j["prior_linear"] = prior_state_json(s.prior_linear);
    j["prior_nonlinear"] = prior_state_json(s.prior_nonlinear);
    j["iterations"] = s.iterations;
    j["converged"] = s.converged;
    j["last_change"] = s.last_change;
    j["elbo_proxy"] = s.elbo_proxy;
    return j;
}

namespace {

constexpr char kMatrixMagic[8] = {'T', 'Q', 'R', 'M', 'A', 'T', '0', '1'};

template <class T>
void put_le(std::string& out, T value) {
    static_assert(std::endian::native == std::endian::little, "big-endian hosts not supported");
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.append(buf, sizeof(T));
}

}  // namespace

void write_matrix_binary(const Matrix& m, const std::filesystem::path& path) {
    std::string out(kMatrixMagic, sizeof(kMatrixMagic));
    put_le(out, static_cast<std::uint32_t>(m.rows()));
    put_le(out, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) put_le(out, m(i, j));
    io::write_file_atomic(path, out);
}

Matrix read_matrix_binary(const std::filesystem::path& path) {
    const std::string data = io::read_file(path);
    if (data.size() < 16 || std::memcmp(data.data(), kMatrixMagic, sizeof(kMatrixMagic)) != 0)
        throw std::runtime_error("not a matrix file: " + path.string());
    std::uint32_t rows = 0, cols = 0;
    std::memcpy(&rows, data.data() + 8, 4);
    std::memcpy(&cols, data.data() + 12, 4);
    if (data.size() != 16 + static_cast<std::size_t>(rows) * cols * 8) throw std::runtime_error("truncated matrix file: " + path.string());
    Matrix m(rows, cols);
    const char* p = data.data() + 16;
    for (std::uint32_t i = 0; i < rows; ++i)
        for (std::uint32_t j = 0; j < cols; ++j, p += 8) std::memcpy(&m(i, j), p, 8);
    return m;
}

}  // namespace tailqr
