#include "hdlp/dgp.hpp"
#include "hdlp/errors.hpp"

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include <random>

namespace hdlp::dgp {

namespace {

Matrix build_companion(const std::vector<Matrix>& mats)
{
    const auto n = mats.front().rows();
    const auto p = static_cast<Eigen::Index>(mats.size());
    Matrix c = Matrix::Zero(n * p, n * p);
    for (Eigen::Index j = 0; j < p; ++j)
        c.block(0, j * n, n, n) = mats[static_cast<std::size_t>(j)];
    if (p > 1)
        c.block(n, 0, n * (p - 1), n * (p - 1)).setIdentity();
    return c;
}

} // namespace

double spectral_radius(const Matrix& m)
{
    if (m.size() == 0)
        return 0.0;
    Eigen::EigenSolver<Matrix> es(m, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

VarCoefficients::VarCoefficients(std::vector<Matrix> mats) : mats_(std::move(mats))
{
    if (mats_.empty())
        throw ArgumentError("VAR order must be at least 1");
    const auto n = mats_.front().rows();
    if (n < 1)
        throw ArgumentError("VAR dimension must be at least 1");
    for (const auto& m : mats_)
        if (m.rows() != n || m.cols() != n)
            throw ArgumentError(fmt::format("all VAR coefficient matrices must be {0}x{0}", n));
    radius_ = dgp::spectral_radius(build_companion(mats_));
    if (!(radius_ < 1.0))
        throw NonstationaryError(fmt::format("companion spectral radius {} >= 1", radius_), radius_);
}

CompanionForm companion(const VarCoefficients& coefs)
{
    return {build_companion(coefs.mats()), coefs.n_vars()};
}

Matrix ma_coefficient(const CompanionForm& cf, std::size_t ell)
{
    const auto n = static_cast<Eigen::Index>(cf.selector_dim);
    // Only the first N columns of C^ell are needed: iterate C * (C^{k} S').
    Matrix cols = Matrix::Identity(cf.C.rows(), n);
    for (std::size_t k = 0; k < ell; ++k)
        cols = cf.C * cols;
    return cols.topRows(n);
}

std::vector<Matrix> ma_coefficients(const CompanionForm& cf, std::size_t max_ell)
{
    const auto n = static_cast<Eigen::Index>(cf.selector_dim);
    std::vector<Matrix> out;
    out.reserve(max_ell + 1);
    Matrix cols = Matrix::Identity(cf.C.rows(), n);
    out.push_back(cols.topRows(n));
    for (std::size_t k = 0; k < max_ell; ++k) {
        cols = cf.C * cols;
        out.push_back(cols.topRows(n));
    }
    return out;
}

PanelSeries simulate_var(const VarCoefficients& coefs, std::size_t T, std::size_t burn_in,
                         std::uint64_t seed)
{
    if (T < 2)
        throw ArgumentError("simulation length T must be at least 2");
    const std::size_t p = coefs.order();
    const auto n = static_cast<Eigen::Index>(coefs.n_vars());
    const std::size_t pad = p - 1;
    const std::size_t total = burn_in + pad + T;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    // Zero history of p rows precedes the first draw.
    Matrix path = Matrix::Zero(static_cast<Eigen::Index>(total + p), n);
    Vector eps(n);
    for (std::size_t s = 0; s < total; ++s) {
        const auto t = static_cast<Eigen::Index>(s + p);
        for (Eigen::Index i = 0; i < n; ++i)
            eps(i) = normal(rng);
        Vector x = eps;
        for (std::size_t j = 0; j < p; ++j)
            x.noalias() += coefs.mats()[j] * path.row(t - 1 - static_cast<Eigen::Index>(j)).transpose();
        path.row(t) = x.transpose();
    }
    Matrix kept = path.bottomRows(static_cast<Eigen::Index>(pad + T));
    return PanelSeries(std::move(kept), pad);
}

VarCoefficients table1_dgp(std::size_t n)
{
    if (n < 2 || n % 2 != 0)
        throw ArgumentError(fmt::format("the sparse two-lag design requires an even N >= 2, got {}", n));
    const auto N = static_cast<Eigen::Index>(n);
    Matrix a1 = Matrix::Zero(N, N);
    Matrix a2 = Matrix::Zero(N, N);
    for (Eigen::Index i = 0; i < N; ++i) {
        // 0-based i: "i <= N/2" in 1-based terms is i < N/2 here.
        if (i < N / 2)
            a1(i, i) = 0.25;
        else
            a2(i, i) = 0.35;
        if (i >= 1)
            a1(i, i - 1) = 0.35;
        if (i + 1 < N)
            a2(i, i + 1) = -0.25;
    }
    return VarCoefficients({a1, a2});
}

} // namespace hdlp::dgp
