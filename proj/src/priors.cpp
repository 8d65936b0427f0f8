#include "tailqr/priors.hpp"

#include "tailqr/gig.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <stdexcept>

namespace tailqr {

namespace {

// Keeps GIG parameters strictly positive when a coefficient is shrunk to
// (numerically) nothing.
constexpr double kCoefSqFloor = 1e-14;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

void require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string("prior hyperparameter ") + what + " must be positive");
}

void update_normal_gamma(PriorState& s, const Vector& sq, double theta, double c0, double d0) {
    const auto n = static_cast<double>(sq.size());
    for (Eigen::Index j = 0; j < sq.size(); ++j) {
        const GigParams g{theta - 0.5, theta * s.global_aux, sq[j]};
        s.inv_local[j] = gig_moment(g, -1.0);
        s.local_aux[j] = gig_moment(g, 1.0);
    }
    s.global_aux = (c0 + n * theta) / (d0 + 0.5 * theta * s.local_aux.sum());
}

}  // namespace

std::string prior_name(const PriorFamily& family) {
    return std::visit(overloaded{
                          [](const prior::Ridge&) -> std::string { return "ridge"; },
                          [](const prior::Horseshoe&) -> std::string { return "horseshoe"; },
                          [](const prior::NormalGamma&) -> std::string { return "ng"; },
                          [](const prior::Lasso&) -> std::string { return "lasso"; },
                          [](const prior::DirichletLaplace&) -> std::string { return "dl"; },
                          [](const prior::MinnesotaFixed&) -> std::string { return "minnesota"; },
                          [](const prior::MinnesotaGamma&) -> std::string { return "minnesota_gamma"; },
                      },
                      family);
}

bool is_minnesota(const PriorFamily& family) {
    return std::holds_alternative<prior::MinnesotaFixed>(family) || std::holds_alternative<prior::MinnesotaGamma>(family);
}

PriorFamily parse_prior(const nlohmann::json& j) {
    const std::string name = j.is_string() ? j.get<std::string>() : j.at("family").get<std::string>();
    const nlohmann::json o = j.is_object() ? j : nlohmann::json::object();
    PriorFamily f;
    if (name == "ridge") {
        f = prior::Ridge{o.value("e0", 0.01), o.value("e1", 0.01)};
        require_positive(std::get<prior::Ridge>(f).e0, "e0");
        require_positive(std::get<prior::Ridge>(f).e1, "e1");
    } else if (name == "horseshoe" || name == "hs") {
        f = prior::Horseshoe{};
    } else if (name == "ng" || name == "normal_gamma") {
        prior::NormalGamma p{o.value("theta", 0.1), o.value("c0", 0.01), o.value("d0", 0.01)};
        require_positive(p.theta, "theta");
        require_positive(p.c0, "c0");
        require_positive(p.d0, "d0");
        f = p;
    } else if (name == "lasso") {
        prior::Lasso p{o.value("c0", 0.01), o.value("d0", 0.01)};
        require_positive(p.c0, "c0");
        require_positive(p.d0, "d0");
        f = p;
    } else if (name == "dl" || name == "dirichlet_laplace") {
        f = prior::DirichletLaplace{o.value("alpha", 0.0)};
    } else if (name == "minnesota" || name == "minnesota_fixed") {
        prior::MinnesotaFixed p{o.value("l1", 0.04), o.value("l2", 0.25)};
        require_positive(p.l1, "l1");
        require_positive(p.l2, "l2");
        f = p;
    } else if (name == "minnesota_gamma" || name == "minn_gamma") {
        prior::MinnesotaGamma p{o.value("c", 0.01), o.value("d", 0.01)};
        require_positive(p.c, "c");
        require_positive(p.d, "d");
        f = p;
    } else {
        throw std::invalid_argument("unknown prior family '" + name + "'");
    }
    return f;
}

PriorState init_prior(const PriorFamily& family, Block block, Eigen::Index n, const Vector& scale,
                      const std::vector<bool>& own_lag) {
    PriorState s;
    s.family = family;
    s.block = block;
    s.inv_local = Vector::Ones(n);
    s.inv_global = 100.0;
    s.local_aux = Vector::Ones(n);
    s.global_aux = 1.0;
    if (n == 0) return s;
    std::visit(overloaded{
                   [&](const prior::Ridge&) {},
                   [&](const prior::Horseshoe&) {},
                   [&](const prior::NormalGamma&) {
                       // global factor folded into the local GIG updates
                       s.inv_local.setConstant(100.0);
                       s.inv_global = 1.0;
                   },
                   [&](const prior::Lasso&) {
                       s.inv_local.setConstant(100.0);
                       s.inv_global = 1.0;
                   },
                   [&](const prior::DirichletLaplace&) {
                       s.local_aux.setConstant(1.0 / static_cast<double>(n));
                   },
                   [&](const auto& minn) {
                       if (scale.size() != n) throw std::invalid_argument("Minnesota prior needs one scale per column");
                       if ((scale.array() <= 0.0).any() || !scale.allFinite())
                           throw std::invalid_argument("Minnesota scales must be positive");
                       s.scale = scale;
                       s.own_lag = own_lag.empty() ? std::vector<bool>(static_cast<std::size_t>(n), false) : own_lag;
                       if (static_cast<Eigen::Index>(s.own_lag.size()) != n)
                           throw std::invalid_argument("own-lag mask length mismatch");
                       double l1 = 0.04, l2 = 0.25;
                       if constexpr (std::is_same_v<std::decay_t<decltype(minn)>, prior::MinnesotaFixed>) {
                           l1 = minn.l1;
                           l2 = minn.l2;
                       }
                       s.inv_global = 1.0 / l1;
                       s.global_aux = 1.0 / l2;
                       for (Eigen::Index j = 0; j < n; ++j)
                           s.inv_local[j] = (s.own_lag[static_cast<std::size_t>(j)] ? 1.0 : s.global_aux) / scale[j];
                   },
               },
               family);
    return s;
}

Vector prior_precision(const PriorState& linear, const PriorState& nonlinear) {
    Vector out(linear.size() + nonlinear.size());
    out << linear.precision(), nonlinear.precision();
    return out;
}

PriorState update_prior(const PriorState& state, const Vector& E_coef_sq) {
    if (E_coef_sq.size() != state.size()) throw std::invalid_argument("update_prior: dimension mismatch");
    if (!E_coef_sq.allFinite()) throw std::invalid_argument("update_prior: non-finite E(coef^2)");
    PriorState s = state;
    const auto n = E_coef_sq.size();
    if (n == 0) return s;
    const Vector sq = E_coef_sq.cwiseMax(kCoefSqFloor);
    const double dn = static_cast<double>(n);

    std::visit(overloaded{
                   [&](const prior::Ridge& p) { s.inv_global = (p.e0 + 0.5 * dn) / (p.e1 + 0.5 * sq.sum()); },
                   [&](const prior::Horseshoe&) {
                       for (Eigen::Index j = 0; j < n; ++j) {
                           s.inv_local[j] = 1.0 / (s.local_aux[j] + 0.5 * sq[j] * s.inv_global);
                           s.local_aux[j] = 1.0 / (1.0 + s.inv_local[j]);
                       }
                       s.inv_global = 0.5 * (dn + 1.0) / (s.global_aux + 0.5 * sq.dot(s.inv_local));
                       s.global_aux = 1.0 / (1.0 + s.inv_global);
                   },
                   [&](const prior::NormalGamma& p) { update_normal_gamma(s, sq, p.theta, p.c0, p.d0); },
                   [&](const prior::Lasso& p) { update_normal_gamma(s, sq, 1.0, p.c0, p.d0); },
                   [&](const prior::DirichletLaplace& p) {
                       const double alpha = p.alpha > 0.0 ? p.alpha : 1.0 / dn;
                       const Vector abs_coef = sq.cwiseSqrt();
                       // Dirichlet weights from the normalized GIG(alpha - 1, 1, 2|b|) conditionals
                       for (Eigen::Index j = 0; j < n; ++j) s.local_aux[j] = gig_moment(GigParams{alpha - 1.0, 1.0, 2.0 * abs_coef[j]}, 1.0);
                       s.local_aux /= s.local_aux.sum();
                       const GigParams tau{dn * alpha - dn, 1.0, 2.0 * abs_coef.cwiseQuotient(s.local_aux).sum()};
                       s.global_aux = gig_moment(tau, 1.0);
                       s.inv_global = gig_moment(tau, -2.0);
                       for (Eigen::Index j = 0; j < n; ++j) {
                           const double inv_psi = s.local_aux[j] * s.global_aux / abs_coef[j];
                           s.inv_local[j] = inv_psi / (s.local_aux[j] * s.local_aux[j]);
                       }
                   },
                   [&](const prior::MinnesotaFixed&) {},
                   [&](const prior::MinnesotaGamma& p) {
                       double b1 = 0.0, b2 = 0.0;
                       Eigen::Index n2 = 0;
                       for (Eigen::Index j = 0; j < n; ++j) {
                           const bool own = s.own_lag[static_cast<std::size_t>(j)];
                           b1 += sq[j] * (own ? 1.0 : s.global_aux) / s.scale[j];
                           if (!own) {
                               b2 += sq[j] / s.scale[j];
                               ++n2;
                           }
                       }
                       s.inv_global = gig_moment(GigParams{p.c - 0.5 * dn, 2.0 * p.d, b1}, -1.0);
                       if (n2 > 0)
                           s.global_aux = gig_moment(GigParams{p.c - 0.5 * static_cast<double>(n2), 2.0 * p.d, s.inv_global * b2}, -1.0);
                       for (Eigen::Index j = 0; j < n; ++j)
                           s.inv_local[j] = (s.own_lag[static_cast<std::size_t>(j)] ? 1.0 : s.global_aux) / s.scale[j];
                   },
               },
               s.family);

    if (!s.inv_local.allFinite() || !std::isfinite(s.inv_global) || (s.inv_local.array() <= 0.0).any() || !(s.inv_global > 0.0))
        throw std::runtime_error("update_prior: " + prior_name(s.family) + " produced a non-finite or non-positive scale");
    return s;
}

double ar_residual_variance(const Vector& series, int lags) {
    const auto n = series.size() - lags;
    if (series.size() < 20 || n <= lags + 1) throw std::invalid_argument("AR residual variance needs at least 20 observations");
    Matrix D(n, lags + 1);
    D.col(0).setOnes();
    for (int l = 1; l <= lags; ++l) D.col(l) = series.segment(lags - l, n);
    const Vector target = series.tail(n);
    Eigen::ColPivHouseholderQR<Matrix> qr(D);
    qr.setThreshold(1e-10);
    if (qr.rank() < D.cols()) throw std::invalid_argument("singular AR design (constant or collinear series)");
    const Vector resid = target - D * qr.solve(target);
    const double var = resid.squaredNorm() / static_cast<double>(n - lags - 1);
    if (!(var > 0.0)) throw std::invalid_argument("singular AR design (zero residual variance)");
    return var;
}

Vector minnesota_scales(const Vector& y, const Matrix& X, int lags) {
    if (X.rows() != y.size()) throw std::invalid_argument("minnesota_scales: dimension mismatch");
    const double sy = ar_residual_variance(y, lags);
    Vector out(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        try {
            out[j] = sy / ar_residual_variance(X.col(j), lags);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("minnesota_scales: column " + std::to_string(j) + ": " + e.what());
        }
    }
    return out;
}

nlohmann::json prior_state_json(const PriorState& s) {
    nlohmann::json j;
    j["family"] = prior_name(s.family);
    j["block"] = s.block == Block::Linear ? "linear" : "nonlinear";
    j["inv_global"] = s.inv_global;
    j["inv_local"] = std::vector<double>(s.inv_local.data(), s.inv_local.data() + s.inv_local.size());
    j["global_aux"] = s.global_aux;
    return j;
}

}  // namespace tailqr
