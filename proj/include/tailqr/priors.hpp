#pragma once

#include "tailqr/data.hpp"

#include <nlohmann/json_fwd.hpp>

#include <string>
#include <variant>
#include <vector>

namespace tailqr {

namespace prior {

/// Inverse-Gamma global variance, unit local scales.
struct Ridge {
    double e0 = 0.01;
    double e1 = 0.01;
};
/// Half-Cauchy local and global scales (inverse-Gamma augmentation).
struct Horseshoe {};
/// psi_j ~ G(theta, theta * lambda / 2) with lambda ~ G(c0, d0).
struct NormalGamma {
    double theta = 0.1;
    double c0 = 0.01;
    double d0 = 0.01;
};
/// Normal-Gamma with theta = 1.
struct Lasso {
    double c0 = 0.01;
    double d0 = 0.01;
};
/// alpha <= 0 selects 1 / (block dimension).
struct DirichletLaplace {
    double alpha = 0.0;
};
struct MinnesotaFixed {
    double l1 = 0.04;
    double l2 = 0.25;
};
/// Minnesota scaling with l1, l2 ~ G(c, d) estimated.
struct MinnesotaGamma {
    double c = 0.01;
    double d = 0.01;
};

}  // namespace prior

using PriorFamily = std::variant<prior::Ridge, prior::Horseshoe, prior::NormalGamma, prior::Lasso,
                                 prior::DirichletLaplace, prior::MinnesotaFixed, prior::MinnesotaGamma>;

std::string prior_name(const PriorFamily& family);
PriorFamily parse_prior(const nlohmann::json& j);
bool is_minnesota(const PriorFamily& family);

enum class Block { Linear, Nonlinear };

/// Variational expectations of one block's global-local scales. The prior
/// precision of coefficient j is inv_global * inv_local[j].
///
/// Auxiliary fields by family:
///   Horseshoe        local_aux = E(1/a_j), global_aux = E(1/xi)
///   NormalGamma/Lasso local_aux = E(psi_j), global_aux = E(lambda)
///   DirichletLaplace local_aux = phi_j (Dirichlet weights), global_aux = E(tau)
///   MinnesotaGamma   global_aux = E(1/l2)
/// For the Minnesota families `scale` holds sigma_y^2 / sigma_j^2 and
/// `own_lag` marks columns exempt from l2.
struct PriorState {
    PriorFamily family;
    Block block = Block::Linear;
    Vector inv_local;
    double inv_global = 1.0;
    Vector local_aux;
    double global_aux = 1.0;
    Vector scale;
    std::vector<bool> own_lag;

    Eigen::Index size() const { return inv_local.size(); }
    Vector precision() const { return inv_global * inv_local; }
};

/// Initial high-shrinkage state for a block of n coefficients. Minnesota
/// families need `scale` (length n); other families ignore it.
PriorState init_prior(const PriorFamily& family, Block block, Eigen::Index n, const Vector& scale = {},
                      const std::vector<bool>& own_lag = {});

/// Stacked diagonal of the prior precision (linear block first).
Vector prior_precision(const PriorState& linear, const PriorState& nonlinear);

/// One sweep of closed-form updates given E(coef^2) for the block.
PriorState update_prior(const PriorState& state, const Vector& E_coef_sq);

/// sigma_y^2 / sigma_i^2 with AR(`lags`) residual variances (intercept
/// included) for the target y and each column of X.
Vector minnesota_scales(const Vector& y, const Matrix& X, int lags = 4);
/// Residual variance of an AR(lags) fit with intercept.
double ar_residual_variance(const Vector& series, int lags = 4);

nlohmann::json prior_state_json(const PriorState& state);

}  // namespace tailqr
