#include "hdlp/errors.hpp"
#include "hdlp/solver.hpp"

#include <doctest.h>

#include <random>

using namespace hdlp;
using namespace hdlp::solver;

namespace {

PenaltyConfig tight()
{
    PenaltyConfig c;
    c.tol = 1e-12;
    c.max_iter = 200000;
    return c;
}

LassoProblem random_problem(std::mt19937_64& rng, int n, int d, double gamma)
{
    std::normal_distribution<double> z;
    LassoProblem p;
    p.design = Matrix(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j)
            p.design(i, j) = z(rng);
    p.response = Vector(n);
    for (int i = 0; i < n; ++i)
        p.response(i) = z(rng) + (d > 0 ? 0.8 * p.design(i, 0) : 0.0);
    p.weights = Vector::Ones(d);
    p.base_gamma = gamma;
    return p;
}

} // namespace

TEST_CASE("soft threshold")
{
    CHECK(soft_threshold(3.0, 1.0) == 2.0);
    CHECK(soft_threshold(-3.0, 1.0) == -2.0);
    CHECK(soft_threshold(0.5, 1.0) == 0.0);
    CHECK(soft_threshold(-1.0, 1.0) == 0.0);
}

TEST_CASE("agrees with the exact oracle")
{
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> nd(2, 8), dd(1, 10);
    std::uniform_real_distribution<double> gd(0.005, 2.0);
    for (int k = 0; k < 100; ++k) {
        auto p = random_problem(rng, nd(rng), dd(rng), gd(rng));
        const auto res = solve_lasso(p, tight());
        const Vector exact = lasso_oracle(p);
        CHECK(std::abs(objective(p, res.beta) - objective(p, exact)) <= 1e-8);
        CHECK(kkt_residual(p, res.beta) <= 1e-6);
    }
}

TEST_CASE("orthonormal design gives soft thresholding at gamma / 2")
{
    // With X'X = n I the problem separates: b_j = S(x_j'y / n, gamma / 2).
    const int n = 8;
    Matrix q = Matrix::Identity(n, n);
    for (int i = 0; i < n; ++i)
        q(i, (i + 1) % n) = 0.3;
    Eigen::HouseholderQR<Matrix> qr(q);
    const Matrix x = Matrix(qr.householderQ()).leftCols(3) * std::sqrt(static_cast<double>(n));
    Vector y(n);
    y << 1.0, -2.0, 0.5, 3.0, 0.1, -0.7, 2.2, -1.1;
    const double gamma = 0.6;
    const auto res = solve_lasso({x, y, Vector::Ones(3), gamma}, tight());
    for (int j = 0; j < 3; ++j) {
        const double z = x.col(j).dot(y) / n;
        CHECK(res.beta(j) == doctest::Approx(soft_threshold(z, gamma / 2.0)).epsilon(1e-10));
    }
}

TEST_CASE("zero penalty reproduces least squares")
{
    std::mt19937_64 rng(4);
    auto p = random_problem(rng, 50, 5, 0.0);
    const auto res = solve_lasso(p, tight());
    const Vector ols = p.design.colPivHouseholderQr().solve(p.response);
    CHECK((res.beta - ols).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("frozen coordinates stay at zero")
{
    std::mt19937_64 rng(5);
    auto p = random_problem(rng, 40, 6, 0.01);
    p.weights(0) = kFrozen;
    p.weights(3) = kFrozen;
    const auto res = solve_lasso(p, tight());
    CHECK(res.beta(0) == 0.0);
    CHECK(res.beta(3) == 0.0);
    CHECK(kkt_residual(p, res.beta) <= 1e-6);

    Vector bad = res.beta;
    bad(0) = 1.0;
    CHECK(std::isinf(objective(p, bad)));
}

TEST_CASE("large penalty gives the zero vector")
{
    std::mt19937_64 rng(6);
    auto p = random_problem(rng, 30, 4, 1.0);
    const double max_score = (2.0 / 30.0 * p.design.transpose() * p.response).cwiseAbs().maxCoeff();
    p.base_gamma = max_score * 1.0001;
    CHECK(solve_lasso(p, tight()).beta.isZero(0.0));
    p.base_gamma = max_score * 0.99;
    CHECK(!solve_lasso(p, tight()).beta.isZero(0.0));
}

TEST_CASE("l1 norm is monotone along the penalty path")
{
    std::mt19937_64 rng(7);
    auto p = random_problem(rng, 60, 12, 0.0);
    double prev = std::numeric_limits<double>::infinity();
    for (double g : {0.001, 0.01, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6}) {
        p.base_gamma = g;
        const double l1 = solve_lasso(p, tight()).beta.lpNorm<1>();
        CHECK(l1 <= prev + 1e-9);
        prev = l1;
    }
}

TEST_CASE("gram and residual modes agree")
{
    std::mt19937_64 rng(8);
    auto p = random_problem(rng, 40, 25, 0.05);
    const CoordinateDescent gram(p.design);
    const CoordinateDescent naive(p.design, 0);
    CHECK(gram.uses_gram());
    CHECK(!naive.uses_gram());
    const auto a = gram.solve(p.response, p.weights, p.base_gamma, tight());
    const auto b = naive.solve(p.response, p.weights, p.base_gamma, tight());
    CHECK((a.beta - b.beta).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("high-dimensional problem satisfies kkt")
{
    std::mt19937_64 rng(9);
    auto p = random_problem(rng, 30, 200, 0.1);
    const auto res = solve_lasso(p, PenaltyConfig{});
    CHECK(res.kkt_residual <= 1e-6);
    CHECK((res.beta.array() != 0.0).count() < 30);
}

TEST_CASE("constant zero column is left at zero")
{
    std::mt19937_64 rng(10);
    auto p = random_problem(rng, 20, 3, 0.05);
    p.design.col(1).setZero();
    const auto res = solve_lasso(p, tight());
    CHECK(res.beta(1) == 0.0);
}

TEST_CASE("convergence failure is reported")
{
    std::mt19937_64 rng(11);
    auto p = random_problem(rng, 30, 10, 0.001);
    PenaltyConfig c = tight();
    c.max_iter = 1;
    try {
        solve_lasso(p, c);
        FAIL("expected a convergence error");
    } catch (const ConvergenceError& e) {
        CHECK(e.kkt_residual() > 0.0);
    }
}

TEST_CASE("argument validation")
{
    LassoProblem p{Matrix::Zero(3, 2), Vector::Zero(4), Vector::Ones(2), 0.1};
    CHECK_THROWS_AS(solve_lasso(p, PenaltyConfig{}), ArgumentError);
    p.response = Vector::Zero(3);
    p.weights = Vector::Ones(3);
    CHECK_THROWS_AS(solve_lasso(p, PenaltyConfig{}), ArgumentError);
    p.weights = Vector::Ones(2);
    p.base_gamma = -1.0;
    CHECK_THROWS_AS(solve_lasso(p, PenaltyConfig{}), ArgumentError);
    p.base_gamma = 0.1;
    p.weights(0) = -1.0;
    CHECK_THROWS_AS(solve_lasso(p, PenaltyConfig{}), ArgumentError);

    PenaltyConfig c;
    c.gamma_scale = 0.0;
    CHECK_THROWS_AS(c.validate(), ArgumentError);
    c = PenaltyConfig{};
    c.tol = 0.0;
    CHECK_THROWS_AS(c.validate(), ArgumentError);

    std::mt19937_64 rng(2);
    auto big = random_problem(rng, 5, static_cast<int>(kOracleMaxDim) + 1, 0.1);
    CHECK_THROWS_AS(lasso_oracle(big), SizeError);
}
