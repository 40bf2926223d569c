#include "hdlp/lp.hpp"
#include "hdlp/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace hdlp::lp {

std::string_view to_string(Stage stage)
{
    switch (stage) {
    case Stage::lasso:
        return "lasso";
    case Stage::adaptive:
        return "adaptive";
    case Stage::debiased:
        return "debiased";
    }
    return "unknown";
}

double gamma_for(std::size_t n_vars, std::size_t t_eff, std::size_t horizon, const solver::PenaltyConfig& config)
{
    if (n_vars < 2)
        throw ArgumentError("the penalty rate needs N >= 2 (log N vanishes at N = 1)");
    if (t_eff < 2)
        throw ArgumentError("effective sample must be at least 2");
    if (horizon < 1)
        throw ArgumentError("horizon must be at least 1");
    return config.gamma_scale * std::pow(static_cast<double>(horizon), 0.2) *
           std::sqrt(std::log(static_cast<double>(n_vars)) / static_cast<double>(t_eff));
}

double xi_for(std::size_t n_vars, std::size_t t_eff, const solver::PenaltyConfig& config)
{
    if (n_vars < 2)
        throw ArgumentError("the lag penalty rate needs N >= 2");
    return config.xi_scale * std::sqrt(std::log(static_cast<double>(n_vars)) / static_cast<double>(t_eff));
}

namespace {

CoefEstimate solve_rows(const LpDesign& design, const Matrix& weights, double gamma,
                        const solver::PenaltyConfig& config, Stage stage)
{
    const solver::CoordinateDescent cd(design.X);
    const auto n = static_cast<Eigen::Index>(design.n_vars);
    CoefEstimate est;
    est.a_tilde = Matrix::Zero(n, design.X.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        try {
            const Vector y = design.Y.col(i);
            const Vector w = weights.row(i).transpose();
            est.a_tilde.row(i) = cd.solve(y, w, gamma, config).beta.transpose();
        } catch (const ConvergenceError& e) {
            throw ConvergenceError(fmt::format("response {}: {}", i, e.what()), e.kkt_residual());
        }
    }
    est.mask = est.a_tilde.array() != 0.0;
    est.stage = stage;
    est.horizon = design.horizon;
    est.lags = design.lags;
    est.gamma_used = gamma;
    return est;
}

} // namespace

CoefEstimate estimate_step1(const LpDesign& design, double gamma, const solver::PenaltyConfig& config)
{
    config.validate();
    const Matrix ones = Matrix::Ones(static_cast<Eigen::Index>(design.n_vars), design.X.cols());
    return solve_rows(design, ones, gamma, config, Stage::lasso);
}

CoefEstimate estimate_step2(const LpDesign& design, const CoefEstimate& step1, double gamma,
                            const solver::PenaltyConfig& config)
{
    config.validate();
    if (step1.stage != Stage::lasso)
        throw ArgumentError("adaptive step expects a step-1 LASSO estimate");
    if (step1.a_tilde.rows() != static_cast<Eigen::Index>(design.n_vars) ||
        step1.a_tilde.cols() != design.X.cols())
        throw ArgumentError("step-1 estimate does not match the design");

    Matrix weights(step1.a_tilde.rows(), step1.a_tilde.cols());
    for (Eigen::Index i = 0; i < weights.rows(); ++i)
        for (Eigen::Index j = 0; j < weights.cols(); ++j) {
            const double a = std::abs(step1.a_tilde(i, j));
            weights(i, j) = a == 0.0 ? solver::kFrozen : std::pow(a, -config.zeta);
        }
    return solve_rows(design, weights, gamma, config, Stage::adaptive);
}

double fit_term(const LpDesign& design, const Matrix& a_tilde)
{
    const Matrix resid = design.Y - design.X * a_tilde.transpose();
    return resid.squaredNorm() / static_cast<double>(design.effective_obs());
}

double information_criterion(const PanelSeries& series, std::size_t p_cand, std::size_t horizon, double xi,
                             const solver::PenaltyConfig& config, std::size_t align_lags)
{
    if (p_cand < 1)
        throw ArgumentError("candidate lag order must be at least 1");
    const LpDesign design = build_design(series, p_cand, horizon, align_lags);
    const double gamma = gamma_for(series.n_vars(), design.effective_obs(), horizon, config);
    const CoefEstimate est = estimate_step1(design, gamma, config);
    return fit_term(design, est.a_tilde) + static_cast<double>(p_cand) * xi;
}

LagSelection select_lag(const PanelSeries& series, const std::vector<std::size_t>& h_set, std::size_t p_max,
                        const solver::PenaltyConfig& config)
{
    if (p_max < 1)
        throw ArgumentError("p_max must be at least 1");
    if (2 * p_max >= series.n_obs())
        throw ArgumentError(fmt::format("p_max = {} must be below T/2 = {}", p_max, series.n_obs() / 2.0));
    if (h_set.empty())
        throw ArgumentError("lag selection needs at least one horizon");

    LagSelection sel;
    for (std::size_t h : h_set) {
        // Every candidate is fitted on the sample aligned to p_max lags.
        const LpDesign probe = build_design(series, 1, h, p_max);
        const double xi = xi_for(series.n_vars(), probe.effective_obs(), config);
        std::vector<double> ic(p_max);
        std::size_t best = 1;
        for (std::size_t p = 1; p <= p_max; ++p) {
            ic[p - 1] = information_criterion(series, p, h, xi, config, p_max);
            if (ic[p - 1] < ic[best - 1])
                best = p;
        }
        sel.per_horizon[h] = best;
        sel.criterion[h] = std::move(ic);
    }
    sel.p_hat = sel.per_horizon.begin()->second;
    return sel;
}

} // namespace hdlp::lp
