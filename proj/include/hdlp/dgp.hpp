#pragma once

#include "hdlp/core.hpp"

#include <cstdint>
#include <vector>

namespace hdlp::dgp {

/// Coefficients a_1..a_p of a stationary VAR(p). Construction rejects
/// non-square or mismatched matrices and a companion spectral radius >= 1.
class VarCoefficients
{
public:
    explicit VarCoefficients(std::vector<Matrix> mats);

    const std::vector<Matrix>& mats() const noexcept { return mats_; }
    std::size_t n_vars() const noexcept { return static_cast<std::size_t>(mats_.front().rows()); }
    std::size_t order() const noexcept { return mats_.size(); }
    double spectral_radius() const noexcept { return radius_; }

private:
    std::vector<Matrix> mats_;
    double radius_ = 0.0;
};

/// C = [a_1 ... a_p; I 0].
struct CompanionForm
{
    Matrix C;
    std::size_t selector_dim = 0;
};

CompanionForm companion(const VarCoefficients& coefs);

/// Largest eigenvalue modulus of a square matrix.
double spectral_radius(const Matrix& m);

/// B_ell = S C^ell S', the top-left N x N block of C^ell.
Matrix ma_coefficient(const CompanionForm& cf, std::size_t ell);

/// B_0 .. B_max_ell computed by one running product.
std::vector<Matrix> ma_coefficients(const CompanionForm& cf, std::size_t max_ell);

inline constexpr std::size_t kDefaultBurnIn = 500;

/**
 * Simulates x_t = sum_j a_j x_{t-j} + e_t with e_t ~ N(0, I) from zero
 * initial conditions. The first `burn_in` draws are discarded; the result
 * holds T observations plus p - 1 pad rows for lag construction.
 */
PanelSeries simulate_var(const VarCoefficients& coefs, std::size_t T, std::size_t burn_in,
                         std::uint64_t seed);

/// The two-lag design used for the simulation study; N must be even.
VarCoefficients table1_dgp(std::size_t n);

} // namespace hdlp::dgp
