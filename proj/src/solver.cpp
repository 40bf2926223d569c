#include "hdlp/solver.hpp"
#include "hdlp/errors.hpp"

#include <fmt/format.h>

#include <cmath>
#include <vector>

namespace hdlp::solver {

void PenaltyConfig::validate() const
{
    if (!(gamma_scale > 0.0) || !(zeta > 0.0) || !(xi_scale > 0.0) || !(eta_scale > 0.0))
        throw ArgumentError("penalty scales must be positive");
    if (!(j_moment >= 4.0))
        throw ArgumentError("moment order J must be at least 4");
    if (max_iter < 1)
        throw ArgumentError("max_iter must be positive");
    if (!(tol > 0.0) || !(tol < 1.0))
        throw ArgumentError("tol must lie in (0, 1)");
}

void LassoProblem::validate() const
{
    if (design.rows() != response.size())
        throw ArgumentError(fmt::format("design has {} rows but response has {} entries", design.rows(),
                                        response.size()));
    if (weights.size() != design.cols())
        throw ArgumentError(fmt::format("design has {} columns but {} weights were given", design.cols(),
                                        weights.size()));
    if (design.rows() < 1)
        throw ArgumentError("empty design");
    if (!(base_gamma >= 0.0) || !std::isfinite(base_gamma))
        throw ArgumentError("base_gamma must be finite and non-negative");
    for (Eigen::Index j = 0; j < weights.size(); ++j)
        if (!(weights(j) >= 0.0))
            throw ArgumentError(fmt::format("weight {} is negative or NaN", j));
}

double soft_threshold(double z, double lambda)
{
    if (z > lambda)
        return z - lambda;
    if (z < -lambda)
        return z + lambda;
    return 0.0;
}

double objective(const LassoProblem& problem, const Vector& beta)
{
    const double n = static_cast<double>(problem.design.rows());
    double pen = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        if (beta(j) == 0.0)
            continue;
        pen += problem.weights(j) * std::abs(beta(j));
    }
    return (problem.response - problem.design * beta).squaredNorm() / n + problem.base_gamma * pen;
}

namespace {

// Gradient scale: d/db_j of the smooth part is -(2/n) * score_j.
double kkt_from_scores(const Vector& scores, const Vector& beta, const Vector& weights, double gamma,
                       double n)
{
    double worst = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        const double w = weights(j);
        if (std::isinf(w))
            continue;
        const double g = 2.0 * scores(j) / n;
        const double bound = gamma * w;
        double v;
        if (beta(j) != 0.0)
            v = std::abs(g - bound * (beta(j) > 0.0 ? 1.0 : -1.0));
        else
            v = std::max(0.0, std::abs(g) - bound);
        worst = std::max(worst, v);
    }
    return worst;
}

} // namespace

double kkt_residual(const LassoProblem& problem, const Vector& beta)
{
    const Vector scores = problem.design.transpose() * (problem.response - problem.design * beta);
    return kkt_from_scores(scores, beta, problem.weights, problem.base_gamma,
                           static_cast<double>(problem.design.rows()));
}

CoordinateDescent::CoordinateDescent(const Matrix& design, std::size_t gram_limit)
    : design_(&design), use_gram_(static_cast<std::size_t>(design.cols()) <= gram_limit)
{
    if (use_gram_) {
        gram_ = design.transpose() * design;
        col_sq_ = gram_.diagonal();
    } else {
        col_sq_ = design.colwise().squaredNorm().transpose();
    }
}

LassoResult CoordinateDescent::solve(const Vector& response, const Vector& weights, double base_gamma,
                                     const PenaltyConfig& config) const
{
    const Matrix& X = *design_;
    const Eigen::Index d = X.cols();
    if (response.size() != X.rows())
        throw ArgumentError(fmt::format("design has {} rows but response has {} entries", X.rows(),
                                        response.size()));
    if (weights.size() != d)
        throw ArgumentError(fmt::format("design has {} columns but {} weights were given", d, weights.size()));

    const double n = static_cast<double>(X.rows());
    const double half_n_gamma = 0.5 * n * base_gamma;
    const double tol = config.tol;

    Vector beta = Vector::Zero(d);
    // Gram mode tracks scores = X'(y - Xb); naive mode tracks the residual.
    Vector scores;
    Vector resid;
    if (use_gram_)
        scores = X.transpose() * response;
    else
        resid = response;

    std::vector<Eigen::Index> free;
    free.reserve(static_cast<std::size_t>(d));
    for (Eigen::Index j = 0; j < d; ++j)
        if (!std::isinf(weights(j)) && col_sq_(j) > 0.0)
            free.push_back(j);

    auto update = [&](Eigen::Index j) -> double {
        const double score_j = use_gram_ ? scores(j) : X.col(j).dot(resid);
        const double rho = score_j + col_sq_(j) * beta(j);
        const double fresh = soft_threshold(rho, half_n_gamma * weights(j)) / col_sq_(j);
        const double delta = fresh - beta(j);
        if (delta != 0.0) {
            beta(j) = fresh;
            if (use_gram_)
                scores.noalias() -= delta * gram_.col(j);
            else
                resid.noalias() -= delta * X.col(j);
        }
        return std::abs(delta);
    };

    auto current_kkt = [&]() {
        if (use_gram_)
            return kkt_from_scores(scores, beta, weights, base_gamma, n);
        const Vector s = X.transpose() * resid;
        return kkt_from_scores(s, beta, weights, base_gamma, n);
    };

    std::vector<Eigen::Index> active;
    int sweeps = 0;
    double kkt = std::numeric_limits<double>::infinity();
    while (sweeps < config.max_iter) {
        double change = 0.0;
        for (auto j : free)
            change = std::max(change, update(j));
        ++sweeps;
        if (change < tol) {
            kkt = current_kkt();
            if (kkt < 10.0 * tol)
                return {std::move(beta), kkt, sweeps};
            continue;
        }
        active.clear();
        for (auto j : free)
            if (beta(j) != 0.0)
                active.push_back(j);
        while (sweeps < config.max_iter) {
            double inner = 0.0;
            for (auto j : active)
                inner = std::max(inner, update(j));
            ++sweeps;
            if (inner < tol)
                break;
        }
    }
    kkt = current_kkt();
    throw ConvergenceError(
        fmt::format("coordinate descent did not converge in {} sweeps (KKT residual {:.3e})", sweeps, kkt),
        kkt);
}

LassoResult solve_lasso(const LassoProblem& problem, const PenaltyConfig& config)
{
    problem.validate();
    CoordinateDescent cd(problem.design);
    return cd.solve(problem.response, problem.weights, problem.base_gamma, config);
}

Vector lasso_oracle(const LassoProblem& problem)
{
    problem.validate();
    const Eigen::Index d = problem.design.cols();
    if (static_cast<std::size_t>(d) > kOracleMaxDim)
        throw SizeError(fmt::format("lasso_oracle supports d <= {}, got {}", kOracleMaxDim, d));

    const double n = static_cast<double>(problem.design.rows());
    const Matrix G = problem.design.transpose() * problem.design;
    const Vector c = problem.design.transpose() * problem.response;
    const double yty = problem.response.squaredNorm();
    const double half_n_gamma = 0.5 * n * problem.base_gamma;

    std::vector<Eigen::Index> free;
    for (Eigen::Index j = 0; j < d; ++j)
        if (!std::isinf(problem.weights(j)))
            free.push_back(j);
    const std::size_t m = free.size();

    Vector best = Vector::Zero(d);
    double best_obj = yty / n;

    for (std::uint32_t support = 1; support < (1u << m); ++support) {
        std::vector<Eigen::Index> idx;
        for (std::size_t k = 0; k < m; ++k)
            if (support & (1u << k))
                idx.push_back(free[k]);
        const auto s = static_cast<Eigen::Index>(idx.size());
        Matrix Gs(s, s);
        Vector cs(s);
        Vector ws(s);
        for (Eigen::Index a = 0; a < s; ++a) {
            cs(a) = c(idx[static_cast<std::size_t>(a)]);
            ws(a) = problem.weights(idx[static_cast<std::size_t>(a)]);
            for (Eigen::Index b = 0; b < s; ++b)
                Gs(a, b) = G(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
        }
        Eigen::LLT<Matrix> llt(Gs);
        if (llt.info() != Eigen::Success)
            continue;
        // Stationary point on the orthant with signs sg: G b = c - (n gamma / 2) w o sg.
        const Vector base = llt.solve(cs);
        const Matrix shift = llt.solve(Matrix(ws.asDiagonal()));
        Vector sg(s);
        Vector b(s);
        for (std::uint32_t signs = 0; signs < (1u << s); ++signs) {
            for (Eigen::Index a = 0; a < s; ++a)
                sg(a) = (signs & (1u << a)) ? -1.0 : 1.0;
            b = base - half_n_gamma * (shift * sg);
            bool feasible = true;
            for (Eigen::Index a = 0; a < s && feasible; ++a)
                feasible = sg(a) * b(a) >= 0.0;
            if (!feasible)
                continue;
            const double fit = (yty - 2.0 * cs.dot(b) + b.dot(Gs * b)) / n;
            const double obj = fit + problem.base_gamma * ws.dot(b.cwiseAbs());
            if (obj < best_obj) {
                best_obj = obj;
                best.setZero();
                for (Eigen::Index a = 0; a < s; ++a)
                    best(idx[static_cast<std::size_t>(a)]) = b(a);
            }
        }
    }
    return best;
}

} // namespace hdlp::solver
