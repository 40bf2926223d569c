#pragma once

#include "hdlp/core.hpp"

#include <cstddef>
#include <limits>

namespace hdlp::solver {

/// Tuning constants shared by the estimation pipeline.
struct PenaltyConfig
{
    double gamma_scale = 1.0; ///< c_gamma in gamma = c_gamma h^{1/5} sqrt(log N / T)
    double zeta = 1.0;        ///< adaptive weight exponent
    double xi_scale = 1.0;    ///< c_xi in the lag-selection penalty
    double eta_scale = 2.0;   ///< c_eta in the covariance threshold
    double j_moment = 5.0;    ///< moment order J; only J = 5 enters the rates
    int max_iter = 10000;
    double tol = 1e-7;

    /// Throws ArgumentError when a field is out of range.
    void validate() const;
};

inline constexpr double kFrozen = std::numeric_limits<double>::infinity();

/// Designs with more columns than this use residual updates instead of a
/// cached Gram matrix.
inline constexpr std::size_t kGramLimit = 4096;

/**
 * min_b (1/n) ||response - design b||^2 + base_gamma * sum_j weights_j |b_j|
 *
 * A weight of +inf (kFrozen) pins the coordinate at zero.
 */
struct LassoProblem
{
    Matrix design;
    Vector response;
    Vector weights;
    double base_gamma = 0.0;

    void validate() const;
};

struct LassoResult
{
    Vector beta;
    double kkt_residual = 0.0;
    int sweeps = 0;
};

double soft_threshold(double z, double lambda);

/// Objective value of `beta` for `problem`; +inf if a frozen coordinate is nonzero.
double objective(const LassoProblem& problem, const Vector& beta);

/// Largest KKT violation of `beta`, measured on the gradient scale.
double kkt_residual(const LassoProblem& problem, const Vector& beta);

/**
 * Cyclic coordinate descent for one design reused across many responses.
 *
 * Holds a reference to `design`, which must outlive the object. The Gram
 * matrix is cached when the design has at most `gram_limit` columns.
 * `solve` is const and safe to call concurrently.
 */
class CoordinateDescent
{
public:
    explicit CoordinateDescent(const Matrix& design, std::size_t gram_limit = kGramLimit);

    /// Throws ConvergenceError after config.max_iter sweeps.
    LassoResult solve(const Vector& response, const Vector& weights, double base_gamma,
                      const PenaltyConfig& config) const;

    bool uses_gram() const noexcept { return use_gram_; }
    std::size_t n_obs() const noexcept { return static_cast<std::size_t>(design_->rows()); }
    std::size_t n_features() const noexcept { return static_cast<std::size_t>(design_->cols()); }

private:
    const Matrix* design_;
    bool use_gram_;
    Matrix gram_;     // X'X when use_gram_
    Vector col_sq_;   // diag(X'X)
};

LassoResult solve_lasso(const LassoProblem& problem, const PenaltyConfig& config);

/// Exact minimiser by enumerating supports and sign patterns; d <= 12.
Vector lasso_oracle(const LassoProblem& problem);

inline constexpr std::size_t kOracleMaxDim = 12;

} // namespace hdlp::solver
