#include "hdlp/inference.hpp"
#include "hdlp/errors.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>

namespace hdlp::inference {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_shapes(const LpDesign& design, const CoefEstimate& est)
{
    if (est.a_tilde.rows() != static_cast<Eigen::Index>(design.n_vars) || est.a_tilde.cols() != design.X.cols())
        throw ArgumentError(fmt::format("estimate is {}x{} but the design expects {}x{}", est.a_tilde.rows(),
                                        est.a_tilde.cols(), design.n_vars, design.X.cols()));
}

} // namespace

ResidualPanel residuals(const LpDesign& design, const CoefEstimate& est)
{
    check_shapes(design, est);
    return {design.Y - design.X * est.a_tilde.transpose(), design.horizon, est.stage};
}

// ---------------------------------------------------------------------------
// LongRunCov

Matrix LongRunCov::window_sums(const Matrix& w) const
{
    if (horizon_ <= 1)
        return w;
    const Eigen::Index n = w.rows();
    const auto band = static_cast<Eigen::Index>(horizon_) - 1;
    Matrix s = Matrix::Zero(n, w.cols());
    for (Eigen::Index t = 0; t < n; ++t) {
        const Eigen::Index lo = std::max<Eigen::Index>(0, t - band);
        const Eigen::Index hi = std::min<Eigen::Index>(n - 1, t + band);
        for (Eigen::Index k = lo; k <= hi; ++k)
            s.row(t) += w.row(k);
    }
    return s;
}

Matrix LongRunCov::score_columns(std::size_t i) const
{
    const auto col = static_cast<Eigen::Index>(i);
    Matrix w(x_.rows(), n_regs_);
    for (Eigen::Index l = 0; l < n_regs_; ++l)
        w.col(l) = u_.col(col).cwiseProduct(x_.col(l));
    return w;
}

LongRunCov LongRunCov::estimate(const LpDesign& design, const ResidualPanel& res, std::size_t dense_limit)
{
    if (res.U.rows() != design.X.rows() || res.U.cols() != static_cast<Eigen::Index>(design.n_vars))
        throw ArgumentError("residual panel does not match the design");
    if (res.horizon != design.horizon)
        throw ArgumentError("residual panel and design disagree on the horizon");
    if (!res.U.allFinite())
        throw ArgumentError("residual panel has non-finite entries");

    LongRunCov cov;
    cov.horizon_ = design.horizon;
    cov.n_vars_ = static_cast<Eigen::Index>(design.n_vars);
    cov.n_regs_ = design.X.cols();
    cov.u_ = res.U;
    cov.x_ = design.X;

    const std::size_t dim = cov.dim();
    if (dim > dense_limit) {
        cov.mode_ = Mode::lazy;
        cov.notice_ = fmt::format("N^2 p = {} exceeds the dense limit {}; entries are computed on demand", dim,
                                  dense_limit);
        return cov;
    }

    cov.mode_ = Mode::dense;
    const Eigen::Index n = design.X.rows();
    const Eigen::Index N = cov.n_vars_;
    const auto D = static_cast<Eigen::Index>(dim);
    Matrix w(n, D);
    for (Eigen::Index l = 0; l < cov.n_regs_; ++l)
        for (Eigen::Index i = 0; i < N; ++i)
            w.col(l * N + i) = res.U.col(i).cwiseProduct(design.X.col(l));
    const Matrix s = cov.window_sums(w);
    Matrix m = w.transpose() * s;
    m /= static_cast<double>(n);
    // Upper triangle is authoritative; mirror it so symmetry is exact.
    for (Eigen::Index b = 0; b < D; ++b)
        for (Eigen::Index a = b + 1; a < D; ++a)
            m(a, b) = m(b, a);
    cov.dense_ = std::move(m);
    return cov;
}

double LongRunCov::entry(std::size_t a, std::size_t b) const
{
    if (a >= dim() || b >= dim())
        throw ArgumentError(fmt::format("covariance index ({}, {}) out of range {}", a, b, dim()));
    if (a > b)
        std::swap(a, b);
    double v;
    if (mode_ == Mode::dense) {
        v = dense_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    } else {
        const auto N = static_cast<std::size_t>(n_vars_);
        const auto ia = static_cast<Eigen::Index>(a % N), la = static_cast<Eigen::Index>(a / N);
        const auto ib = static_cast<Eigen::Index>(b % N), lb = static_cast<Eigen::Index>(b / N);
        const Vector wa = u_.col(ia).cwiseProduct(x_.col(la));
        const Matrix wb = u_.col(ib).cwiseProduct(x_.col(lb));
        const Matrix sb = window_sums(wb);
        v = wa.dot(sb.col(0)) / static_cast<double>(x_.rows());
    }
    if (a != b && std::abs(v) < eta_)
        return 0.0;
    return v;
}

Matrix LongRunCov::response_block(std::size_t i) const
{
    if (i >= n_vars())
        throw ArgumentError(fmt::format("response index {} out of range {}", i, n_vars()));
    const Eigen::Index p = n_regs_;
    Matrix block(p, p);
    if (mode_ == Mode::dense) {
        const auto N = n_vars_;
        const auto ii = static_cast<Eigen::Index>(i);
        for (Eigen::Index l = 0; l < p; ++l)
            for (Eigen::Index k = 0; k < p; ++k)
                block(l, k) = dense_(l * N + ii, k * N + ii);
        return block;
    }
    const Matrix w = score_columns(i);
    const Matrix s = window_sums(w);
    block = w.transpose() * s;
    block /= static_cast<double>(x_.rows());
    for (Eigen::Index b = 0; b < p; ++b)
        for (Eigen::Index a = b + 1; a < p; ++a)
            block(a, b) = block(b, a);
    for (Eigen::Index b = 0; b < p; ++b)
        for (Eigen::Index a = 0; a < p; ++a)
            if (a != b && std::abs(block(a, b)) < eta_)
                block(a, b) = 0.0;
    return block;
}

Matrix LongRunCov::to_dense() const
{
    if (mode_ == Mode::dense)
        return dense_;
    const auto D = static_cast<Eigen::Index>(dim());
    Matrix out(D, D);
    for (Eigen::Index a = 0; a < D; ++a)
        for (Eigen::Index b = a; b < D; ++b)
            out(a, b) = out(b, a) = entry(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
    return out;
}

LongRunCov LongRunCov::thresholded(double eta) const
{
    if (!(eta >= 0.0))
        throw ArgumentError("threshold must be non-negative");
    LongRunCov out = *this;
    out.eta_ = std::max(eta_, eta);
    if (mode_ == Mode::dense) {
        const Eigen::Index D = dense_.rows();
        for (Eigen::Index b = 0; b < D; ++b)
            for (Eigen::Index a = 0; a < D; ++a)
                if (a != b && std::abs(out.dense_(a, b)) < eta)
                    out.dense_(a, b) = 0.0;
    }
    return out;
}

LongRunCov omega_hat(const LpDesign& design, const ResidualPanel& res, std::size_t dense_limit)
{
    return LongRunCov::estimate(design, res, dense_limit);
}

LongRunCov threshold(const LongRunCov& cov, double eta)
{
    return cov.thresholded(eta);
}

double eta_for(std::size_t n_vars, std::size_t t_eff, std::size_t horizon, const solver::PenaltyConfig& config)
{
    if (n_vars < 2)
        throw ArgumentError("the threshold rate needs N >= 2");
    return config.eta_scale * std::sqrt(static_cast<double>(horizon) * std::log(static_cast<double>(n_vars)) /
                                        static_cast<double>(t_eff));
}

// ---------------------------------------------------------------------------
// Node-wise regressions and debiasing

PrecisionEstimate nodewise(const LpDesign& design, double gamma_tilde, const solver::PenaltyConfig& config)
{
    config.validate();
    if (!(gamma_tilde >= 0.0))
        throw ArgumentError("gamma_tilde must be non-negative");
    const Matrix& X = design.X;
    const Eigen::Index d = X.cols();
    const double n = static_cast<double>(X.rows());
    const solver::CoordinateDescent cd(X);

    PrecisionEstimate prec;
    prec.gamma_tilde = gamma_tilde;
    prec.theta = Matrix::Zero(d, d);
    prec.tau2 = Vector::Zero(d);
    prec.b_hats = Matrix::Zero(d, d);

    Vector weights = Vector::Ones(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        // Regressing column j on all others: freeze j itself.
        weights(j) = solver::kFrozen;
        const Vector target = X.col(j);
        solver::LassoResult fit;
        try {
            fit = cd.solve(target, weights, 2.0 * gamma_tilde, config);
        } catch (const ConvergenceError& e) {
            throw ConvergenceError(fmt::format("node {}: {}", j, e.what()), e.kkt_residual());
        }
        weights(j) = 1.0;

        const double rss = (target - X * fit.beta).squaredNorm() / n;
        const double tau2 = rss + gamma_tilde * fit.beta.lpNorm<1>();
        if (!(tau2 > 1e-12))
            throw DegenerateNodeError(fmt::format("node {} has tau^2 = {:.3e}", j, tau2),
                                      static_cast<std::size_t>(j));
        if (rss <= 1e-10 * std::max(1.0, target.squaredNorm() / n))
            prec.near_floor.push_back(static_cast<std::size_t>(j));

        prec.tau2(j) = tau2;
        prec.b_hats.row(j) = fit.beta.transpose();
        prec.theta.row(j) = -fit.beta.transpose() / tau2;
        prec.theta(j, j) = 1.0 / tau2;
    }
    return prec;
}

CoefEstimate debias(const LpDesign& design, const CoefEstimate& step1, const PrecisionEstimate& prec)
{
    check_shapes(design, step1);
    if (prec.theta.rows() != design.X.cols() || prec.theta.cols() != design.X.cols())
        throw ArgumentError("precision estimate does not match the design");
    const Matrix resid = design.Y - design.X * step1.a_tilde.transpose();
    const Matrix correction =
        (resid.transpose() * design.X) * prec.theta.transpose() / static_cast<double>(design.effective_obs());

    CoefEstimate out = step1;
    out.a_tilde += correction;
    out.mask = Mask::Constant(out.a_tilde.rows(), out.a_tilde.cols(), true);
    out.stage = lp::Stage::debiased;
    return out;
}

CoefEstimate apply_sparsity(const CoefEstimate& debiased, const CoefEstimate& mask_source)
{
    if (mask_source.stage != lp::Stage::adaptive)
        throw ArgumentError("sparsity mask must come from the adaptive estimate");
    if (debiased.a_tilde.rows() != mask_source.mask.rows() || debiased.a_tilde.cols() != mask_source.mask.cols())
        throw ArgumentError("estimate and mask shapes differ");
    CoefEstimate out = debiased;
    out.a_tilde = mask_source.mask.select(debiased.a_tilde, 0.0);
    out.mask = mask_source.mask;
    out.stage = lp::Stage::debiased;
    return out;
}

CoefVariance coef_variance(std::size_t row, std::size_t col, const PrecisionEstimate& prec, const LongRunCov& cov)
{
    if (row >= cov.n_vars() || col >= cov.n_regressors() ||
        prec.theta.rows() != static_cast<Eigen::Index>(cov.n_regressors()))
        throw ArgumentError(fmt::format("coefficient ({}, {}) out of range", row, col));
    const auto N = cov.n_vars();
    const auto theta = prec.theta.row(static_cast<Eigen::Index>(col));
    std::vector<std::size_t> nz;
    for (Eigen::Index l = 0; l < theta.size(); ++l)
        if (theta(l) != 0.0)
            nz.push_back(static_cast<std::size_t>(l));

    double q = 0.0;
    for (std::size_t a : nz)
        for (std::size_t b : nz)
            q += theta(static_cast<Eigen::Index>(a)) * theta(static_cast<Eigen::Index>(b)) *
                 cov.entry(a * N + row, b * N + row);
    if (q < 0.0)
        return {0.0, true};
    return {q, false};
}

Matrix impulse_variances(const PrecisionEstimate& prec, const LongRunCov& cov, std::size_t* n_clamped)
{
    const auto N = static_cast<Eigen::Index>(cov.n_vars());
    Matrix var(N, N);
    std::size_t clamped = 0;
    for (Eigen::Index i = 0; i < N; ++i) {
        const Matrix block = cov.response_block(static_cast<std::size_t>(i));
        for (Eigen::Index j = 0; j < N; ++j) {
            const auto theta = prec.theta.row(j);
            std::vector<Eigen::Index> nz;
            for (Eigen::Index l = 0; l < theta.size(); ++l)
                if (theta(l) != 0.0)
                    nz.push_back(l);
            double q = 0.0;
            for (auto a : nz)
                for (auto b : nz)
                    q += theta(a) * theta(b) * block(a, b);
            if (q < 0.0) {
                q = 0.0;
                ++clamped;
            }
            var(i, j) = q;
        }
    }
    if (n_clamped)
        *n_clamped = clamped;
    return var;
}

double normal_quantile(double prob)
{
    if (!(prob > 0.0 && prob < 1.0))
        throw ArgumentError("quantile probability must lie in (0, 1)");
    // Acklam's rational approximation, then one Halley step against erfc.
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double lo = 0.02425;
    double x;
    if (prob < lo) {
        const double q = std::sqrt(-2.0 * std::log(prob));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (prob <= 1.0 - lo) {
        const double q = prob - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-prob));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - prob;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

// ---------------------------------------------------------------------------
// Full pipeline

HorizonFit fit_horizon(const PanelSeries& series, std::size_t p, std::size_t horizon, double level,
                       const solver::PenaltyConfig& config, const PipelineOptions& options)
{
    if (!(level > 0.0 && level < 1.0))
        throw ArgumentError("confidence level must lie in (0, 1)");
    HorizonFit fit;
    fit.design = build_design(series, p, horizon);
    const LpDesign& design = fit.design;
    const std::size_t n_eff = design.effective_obs();

    fit.gamma = lp::gamma_for(series.n_vars(), n_eff, horizon, config);
    fit.step1 = lp::estimate_step1(design, fit.gamma, config);
    fit.step2 = lp::estimate_step2(design, fit.step1, fit.gamma, config);
    fit.precision = nodewise(design, fit.gamma, config);
    fit.debiased = apply_sparsity(debias(design, fit.step1, fit.precision), fit.step2);
    fit.eta = eta_for(series.n_vars(), n_eff, horizon, config);
    if (!options.compute_bands)
        return fit;

    const auto& res_source = options.adaptive_residuals ? fit.step2 : fit.step1;
    const LongRunCov cov = threshold(omega_hat(design, residuals(design, res_source), options.dense_limit), fit.eta);
    const Matrix var = impulse_variances(fit.precision, cov, &fit.band.n_clamped);

    IrfBand& band = fit.band;
    band.horizon = horizon;
    band.level = level;
    band.point = fit.debiased.impulse_block();
    band.selected = fit.step2.impulse_mask();
    const double z = normal_quantile(0.5 * (1.0 + level));
    const auto N = band.point.rows();
    band.se = Matrix::Constant(N, N, kNaN);
    band.lower = Matrix::Constant(N, N, kNaN);
    band.upper = Matrix::Constant(N, N, kNaN);
    for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index j = 0; j < N; ++j) {
            if (!band.selected(i, j))
                continue;
            const double se = std::sqrt(var(i, j) / static_cast<double>(n_eff));
            band.se(i, j) = se;
            band.lower(i, j) = band.point(i, j) - z * se;
            band.upper(i, j) = band.point(i, j) + z * se;
        }
    return fit;
}

std::vector<IrfBand> irf_with_bands(const PanelSeries& series, std::size_t p, const std::vector<std::size_t>& horizons,
                                    double level, const solver::PenaltyConfig& config, const PipelineOptions& options)
{
    if (horizons.empty())
        throw ArgumentError("at least one horizon is required");
    std::vector<IrfBand> out;
    out.reserve(horizons.size());
    for (std::size_t h : horizons) {
        if (h < 1 || 2 * h >= series.n_obs())
            throw ArgumentError(fmt::format("horizon {} must satisfy 1 <= h < T/2 (T = {})", h, series.n_obs()));
        try {
            auto opts = options;
            opts.compute_bands = true;
            out.push_back(fit_horizon(series, p, h, level, config, opts).band);
        } catch (const DegenerateNodeError& e) {
            throw DegenerateNodeError(fmt::format("horizon {}: {}", h, e.what()), e.node());
        } catch (const ConvergenceError& e) {
            throw ConvergenceError(fmt::format("horizon {}: {}", h, e.what()), e.kkt_residual());
        } catch (const InsufficientSampleError& e) {
            throw InsufficientSampleError(fmt::format("horizon {}: {}", h, e.what()));
        }
    }
    return out;
}

} // namespace hdlp::inference
