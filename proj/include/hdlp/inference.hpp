#pragma once

#include "hdlp/core.hpp"
#include "hdlp/lp.hpp"
#include "hdlp/solver.hpp"

#include <string>
#include <vector>

namespace hdlp::inference {

using lp::CoefEstimate;
using lp::Mask;

/// u_hat_t = x_{t+h} - A X_t for every row of the design, (T-h) x N.
struct ResidualPanel
{
    Matrix U;
    std::size_t horizon = 0;
    lp::Stage source = lp::Stage::lasso;
};

ResidualPanel residuals(const LpDesign& design, const CoefEstimate& est);

/// Largest N^2 p handled with dense storage.
inline constexpr std::size_t kDenseLimit = 4096;

/**
 * Long-horizon covariance of the score w_t = vec(u_t X_t'):
 *
 *   Omega_h = (1/n) sum_{|t-k| < h} w_t w_k'
 *
 * Index a = l*N + i addresses regressor l and response i. In dense mode the
 * full matrix is stored; in lazy mode entries are rebuilt from the residuals
 * and regressors on request. Thresholding keeps the diagonal and zeroes
 * off-diagonals with magnitude below eta.
 */
class LongRunCov
{
public:
    enum class Mode { dense, lazy };

    /// `dense_limit` caps N^2 p for dense storage; larger problems go lazy.
    static LongRunCov estimate(const LpDesign& design, const ResidualPanel& res,
                               std::size_t dense_limit = kDenseLimit);

    Mode mode() const noexcept { return mode_; }
    double eta() const noexcept { return eta_; }
    std::size_t horizon() const noexcept { return horizon_; }
    std::size_t t_eff() const noexcept { return static_cast<std::size_t>(x_.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(n_vars_ * n_regs_); }
    std::size_t n_vars() const noexcept { return static_cast<std::size_t>(n_vars_); }
    std::size_t n_regressors() const noexcept { return static_cast<std::size_t>(n_regs_); }
    /// Non-empty when a dense request fell back to lazy storage.
    const std::string& notice() const noexcept { return notice_; }

    double entry(std::size_t a, std::size_t b) const;

    /// Np x Np block of entries (l*N + i, l'*N + i) for one response i.
    Matrix response_block(std::size_t i) const;

    /// Full matrix; intended for small instances.
    Matrix to_dense() const;

    /// Copy with every off-diagonal |entry| < eta set to zero.
    LongRunCov thresholded(double eta) const;

private:
    LongRunCov() = default;

    Matrix window_sums(const Matrix& w) const;
    Matrix score_columns(std::size_t i) const;

    Mode mode_ = Mode::dense;
    double eta_ = 0.0;
    std::size_t horizon_ = 0;
    Eigen::Index n_vars_ = 0;
    Eigen::Index n_regs_ = 0;
    Matrix dense_;
    Matrix u_;
    Matrix x_;
    std::string notice_;
};

LongRunCov omega_hat(const LpDesign& design, const ResidualPanel& res, std::size_t dense_limit = kDenseLimit);

/// Thresholding operator; eta = +inf keeps only the diagonal.
LongRunCov threshold(const LongRunCov& cov, double eta);

/// eta = c_eta * sqrt(h log N / T_eff).
double eta_for(std::size_t n_vars, std::size_t t_eff, std::size_t horizon, const solver::PenaltyConfig& config);

/**
 * Node-wise LASSO on the Np regressors. Row j of theta is
 * tau2_j^{-1} * (1 at j, -b_hat_j elsewhere); the N^2 p version equals
 * theta kron I_N.
 */
struct PrecisionEstimate
{
    Matrix theta;
    Vector tau2;
    Matrix b_hats;  ///< row j holds b_hat_j in column order, zero at j
    double gamma_tilde = 0.0;
    std::vector<std::size_t> near_floor; ///< nodes whose residual variance vanished
};

PrecisionEstimate nodewise(const LpDesign& design, double gamma_tilde, const solver::PenaltyConfig& config);

/// a_hat + (1/n) sum_t r_t X_t' theta', with r_t the residuals of `step1`.
CoefEstimate debias(const LpDesign& design, const CoefEstimate& step1, const PrecisionEstimate& prec);

/// Zeroes entries outside the adaptive mask and adopts that mask.
CoefEstimate apply_sparsity(const CoefEstimate& debiased, const CoefEstimate& mask_source);

struct CoefVariance
{
    double variance = 0.0;
    bool clamped = false; ///< quadratic form was negative and set to zero
};

/// v' G(Omega) v with v = theta_j kron e_i for coefficient (row i, column j).
CoefVariance coef_variance(std::size_t row, std::size_t col, const PrecisionEstimate& prec, const LongRunCov& cov);

/// Variances for every (i, j) of the A_1 block; one covariance block per row.
Matrix impulse_variances(const PrecisionEstimate& prec, const LongRunCov& cov, std::size_t* n_clamped = nullptr);

/// Inverse standard normal CDF.
double normal_quantile(double prob);

struct IrfBand
{
    std::size_t horizon = 0;
    double level = 0.9;
    Matrix point;     ///< debiased A_1 after masking
    Matrix se;        ///< NaN where not selected
    Mask selected;
    Matrix lower;     ///< NaN where not selected
    Matrix upper;
    std::size_t n_clamped = 0;
};

struct PipelineOptions
{
    bool adaptive_residuals = false;  ///< build Omega from step-2 rather than step-1 residuals
    bool compute_bands = true;
    std::size_t dense_limit = kDenseLimit;
};

/// Every intermediate of one horizon.
struct HorizonFit
{
    LpDesign design;
    double gamma = 0.0;
    CoefEstimate step1;
    CoefEstimate step2;
    PrecisionEstimate precision;
    CoefEstimate debiased;  ///< after apply_sparsity
    double eta = 0.0;
    IrfBand band;           ///< empty unless compute_bands
};

HorizonFit fit_horizon(const PanelSeries& series, std::size_t p, std::size_t horizon, double level,
                       const solver::PenaltyConfig& config, const PipelineOptions& options = {});

std::vector<IrfBand> irf_with_bands(const PanelSeries& series, std::size_t p, const std::vector<std::size_t>& horizons,
                                    double level, const solver::PenaltyConfig& config,
                                    const PipelineOptions& options = {});

} // namespace hdlp::inference
