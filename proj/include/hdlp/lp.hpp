#pragma once

#include "hdlp/core.hpp"
#include "hdlp/solver.hpp"

#include <map>
#include <string_view>
#include <vector>

namespace hdlp::lp {

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

enum class Stage { lasso, adaptive, debiased };

std::string_view to_string(Stage stage);

/**
 * Coefficient matrix (A_1, ..., A_p) of one horizon, N x Np.
 *
 * For `lasso` the mask is the literal nonzero pattern. For `adaptive` it is
 * the sparsity identification used downstream. A freshly debiased estimate
 * carries an all-true mask until apply_sparsity replaces it.
 */
struct CoefEstimate
{
    Matrix a_tilde;
    Mask mask;
    Stage stage = Stage::lasso;
    std::size_t horizon = 0;
    std::size_t lags = 0;
    double gamma_used = 0.0;

    std::size_t n_vars() const noexcept { return static_cast<std::size_t>(a_tilde.rows()); }
    /// A_1, the N x N impulse-response block.
    Matrix impulse_block() const { return a_tilde.leftCols(a_tilde.rows()); }
    Mask impulse_mask() const { return mask.leftCols(mask.rows()); }
};

/// c_gamma * h^{1/5} * sqrt(log N / T_eff); requires N >= 2.
double gamma_for(std::size_t n_vars, std::size_t t_eff, std::size_t horizon,
                 const solver::PenaltyConfig& config);

/// Row-wise LASSO: N independent problems sharing one design and one gamma.
CoefEstimate estimate_step1(const LpDesign& design, double gamma, const solver::PenaltyConfig& config);

/// Adaptive LASSO with weights |a_hat|^{-zeta}; zeros of step 1 stay zero.
CoefEstimate estimate_step2(const LpDesign& design, const CoefEstimate& step1, double gamma,
                            const solver::PenaltyConfig& config);

/// Mean squared in-sample residual norm, (1/n) sum_t ||y_t - A X_t||^2.
double fit_term(const LpDesign& design, const Matrix& a_tilde);

/**
 * Lag-selection criterion IC(p) = fit of the step-1 LASSO at p lags + p * xi.
 *
 * `align_lags` sets the common estimation sample (pass p_max when comparing
 * candidates). gamma follows gamma_for on that sample.
 */
double information_criterion(const PanelSeries& series, std::size_t p_cand, std::size_t horizon, double xi,
                             const solver::PenaltyConfig& config, std::size_t align_lags = 0);

/// xi = c_xi * sqrt(log N / T_eff).
double xi_for(std::size_t n_vars, std::size_t t_eff, const solver::PenaltyConfig& config);

struct LagSelection
{
    std::size_t p_hat = 0;                                 ///< from the smallest horizon
    std::map<std::size_t, std::size_t> per_horizon;        ///< h -> argmin
    std::map<std::size_t, std::vector<double>> criterion;  ///< h -> IC(1..p_max)
};

/// Argmin of IC over 1..p_max for each horizon; ties go to the smaller lag.
LagSelection select_lag(const PanelSeries& series, const std::vector<std::size_t>& h_set, std::size_t p_max,
                        const solver::PenaltyConfig& config);

} // namespace hdlp::lp
