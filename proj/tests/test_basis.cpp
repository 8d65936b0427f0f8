#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "tailqr/basis.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <random>

using namespace tailqr;
using doctest::Approx;

TEST_CASE("parse_basis names and validation") {
    CHECK(basis_name(parse_basis("none")) == "none");
    CHECK(basis_name(parse_basis("gp")) == "gp");
    CHECK(basis_name(parse_basis(nlohmann::json{{"kind", "poly"}, {"max_degree", 4}})) == "poly");
    CHECK(basis_name(parse_basis("spline")) == "spline");
    CHECK_THROWS(parse_basis("wavelet"));
    CHECK_THROWS(parse_basis(nlohmann::json{{"kind", "poly"}, {"max_degree", 1}}));
    CHECK_THROWS(parse_basis(nlohmann::json{{"kind", "spline"}, {"knot_quantiles", {0.2, 0.5, 1.0}}}));
    CHECK_THROWS(parse_basis(nlohmann::json{{"kind", "gp"}, {"w1", -1.0}}));
}

TEST_CASE("no basis gives an empty block") {
    Matrix X = Matrix::Random(20, 3);
    const auto e = build_basis(basis::None{}, X);
    CHECK(e.M() == 0);
    CHECK(e.Z.rows() == 20);
    CHECK(evaluate_basis(e, Vector::Zero(3)).size() == 0);
}

TEST_CASE("polynomial columns are standardized powers") {
    std::mt19937_64 rng(3);
    const Matrix X = oracle::gaussian_matrix(60, 2, rng);
    const auto e = build_polynomial(X, 3);
    REQUIRE(e.M() == 4);
    for (Eigen::Index c = 0; c < e.M(); ++c) {
        CHECK(e.Z.col(c).mean() == Approx(0.0).scale(1.0));
        const double var = (e.Z.col(c).array() - e.Z.col(c).mean()).square().sum() / 59.0;
        CHECK(var == Approx(1.0).epsilon(0.02));
    }
    // column 3 is x_2 cubed up to an affine map
    const Vector cube = X.col(1).array().cube();
    const double corr = (cube.array() - cube.mean()).matrix().normalized().dot((e.Z.col(3).array() - e.Z.col(3).mean()).matrix().normalized());
    CHECK(corr == Approx(1.0).epsilon(1e-12));
    for (Eigen::Index t : {0, 17, 59}) CHECK((evaluate_basis(e, X.row(t).transpose()) - e.Z.row(t).transpose()).norm() < 1e-12);
}

TEST_CASE("spline knots and column count") {
    Vector x(101);
    for (int i = 0; i <= 100; ++i) x[i] = i;
    const auto knots = spline_knots(x, basis::Spline{}.knot_quantiles);
    REQUIRE(knots.size() == 15);
    CHECK(knots[0] == 0.0);
    CHECK(knots[3] == 0.0);
    CHECK(knots[4] == Approx(5.0));
    CHECK(knots[7] == Approx(50.0));
    CHECK(knots[14] == 100.0);
    CHECK(spline_columns(knots) == 9);
    CHECK(spline_knots(Vector::Constant(10, 2.0), basis::Spline{}.knot_quantiles).empty());
}

TEST_CASE("merged spline rows are a partition of unity matching Cox-de Boor") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0.0, 1.0);
    Vector col(200);
    for (auto& v : col) v = n(rng);
    const auto t = spline_knots(col, basis::Spline{}.knot_quantiles);
    std::uniform_real_distribution<double> u(t.front(), t.back());
    std::vector<double> probes{t.front(), t.back(), t[5], t[7]};
    for (int i = 0; i < 200; ++i) probes.push_back(u(rng));
    for (double x : probes) {
        const Vector row = spline_basis_row(t, x);
        REQUIRE(row.size() == 9);
        CHECK(row.sum() == Approx(1.0).epsilon(1e-12));
        CHECK(row.minCoeff() >= -1e-15);
        const auto full = oracle::cox_de_boor(t, kSplineDegree, x);
        REQUIRE(full.size() == 11);
        std::vector<double> merged{full[0] + full[1]};
        for (int k = 2; k < 9; ++k) merged.push_back(full[static_cast<std::size_t>(k)]);
        merged.push_back(full[9] + full[10]);
        for (int k = 0; k < 9; ++k) CHECK(row[k] == Approx(merged[static_cast<std::size_t>(k)]).epsilon(1e-12).scale(1.0));
    }
    // clamping outside the knot range
    CHECK((spline_basis_row(t, t.back() + 5.0) - spline_basis_row(t, t.back())).norm() == 0.0);
    CHECK((spline_basis_row(t, t.front() - 5.0) - spline_basis_row(t, t.front())).norm() == 0.0);
}

TEST_CASE("spline expansion handles a constant covariate") {
    std::mt19937_64 rng(5);
    Matrix X = oracle::gaussian_matrix(50, 2, rng);
    X.col(1).setConstant(1.0);
    const auto e = build_spline(X, basis::Spline{}.knot_quantiles);
    CHECK(e.M() == 9);
    CHECK(e.warnings.size() == 1);
    for (Eigen::Index t : {0, 25, 49}) CHECK((evaluate_basis(e, X.row(t).transpose()) - e.Z.row(t).transpose()).norm() < 1e-10);
}

TEST_CASE("median heuristic matches brute force") {
    std::mt19937_64 rng(6);
    for (int rows : {2, 3, 10, 31}) {
        const Matrix X = oracle::gaussian_matrix(rows, 4, rng);
        CHECK(median_heuristic(X).w2 == Approx(1.0 / oracle::median_pairwise_sq_distance(X)).epsilon(1e-14));
        CHECK(median_heuristic(X).w1 == 1.0);
    }
    CHECK_THROWS(median_heuristic(Matrix::Ones(5, 2)));
}

TEST_CASE("squared exponential kernel values") {
    Matrix A(2, 2);
    A << 0.0, 0.0, 1.0, 1.0;
    const Matrix K = se_kernel(A, A, 1.0, 1.0);
    CHECK(K(0, 0) == 1.0);
    CHECK(K(0, 1) == Approx(0.36787944117).epsilon(1e-10));
    CHECK(K(1, 0) == K(0, 1));
    CHECK(se_kernel(A, A, 2.5, 0.3).diagonal().isApprox(Vector::Constant(2, 2.5)));
}

TEST_CASE("gp basis reproduces the kernel") {
    std::mt19937_64 rng(7);
    const Matrix X = oracle::gaussian_matrix(40, 3, rng);
    const auto kw = median_heuristic(X);
    const auto e = build_gp(X, 1.7, kw.w2);
    REQUIRE(e.M() == 40);
    Matrix K = se_kernel(X, X, 1.7, kw.w2);
    K.diagonal().array() += e.jitter;
    CHECK((e.Z * e.Z.transpose() - K).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(e.jitter <= 1e-4 * 1.7);
    for (Eigen::Index t : {0, 13, 39}) CHECK((evaluate_basis(e, X.row(t).transpose()) - e.Z.row(t).transpose()).norm() < 1e-8);
    // a new point: z' z recovers the kernel diagonal up to the projection residual
    const Vector x_new = Vector::Constant(3, 0.1);
    const Vector z = evaluate_basis(e, x_new);
    CHECK(z.squaredNorm() <= 1.7 + 1e-9);
}

TEST_CASE("gp jitter escalates on duplicated rows") {
    Matrix X(6, 1);
    X << 0.0, 0.0, 0.0, 1.0, 2.0, 3.0;
    const auto e = build_gp(X, 1.0, 1.0);
    CHECK(e.jitter > 0.0);
    CHECK(e.chol_lower.allFinite());
}

TEST_CASE("build_basis picks the bandwidth on the training window only") {
    std::mt19937_64 rng(8);
    const Matrix X = oracle::gaussian_matrix(30, 2, rng);
    const auto e = build_basis(basis::GaussianProcess{}, X);
    CHECK(e.w2 == Approx(1.0 / oracle::median_pairwise_sq_distance(X)));
    const auto fixed = build_basis(basis::GaussianProcess{1.0, 0.25}, X);
    CHECK(fixed.w2 == 0.25);
    const auto meta = basis_metadata(e);
    CHECK(meta["kind"] == "gp");
    CHECK(meta["M"] == 30);
}
