#include "hdlp/montecarlo.hpp"
#include "hdlp/dgp.hpp"
#include "hdlp/errors.hpp"
#include "hdlp/inference.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

namespace hdlp::montecarlo {

solver::PenaltyConfig simulation_config()
{
    solver::PenaltyConfig c;
    c.gamma_scale = 1.7;
    c.xi_scale = 4.75;
    return c;
}

void McScenario::validate() const
{
    if (replications < 1)
        throw ArgumentError("scenario needs at least one replication");
    if (n_vars < 2 || n_vars % 2 != 0)
        throw ArgumentError(fmt::format("scenario N must be even, got {}", n_vars));
    if (horizons.empty() || h_select.empty())
        throw ArgumentError("scenario needs estimation and selection horizons");
    for (const auto* set : {&horizons, &h_select})
        for (std::size_t h : *set)
            if (h < 1 || 2 * h >= n_obs)
                throw ArgumentError(fmt::format("horizon {} must satisfy 1 <= h < T/2", h));
    if (p_max < 1)
        throw ArgumentError("p_max must be at least 1");
    config.validate();
}

void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn)
{
    workers = std::max<std::size_t>(1, std::min(workers, count));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count)
                    return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!first_error)
                        first_error = std::current_exception();
                }
            }
        });
    for (auto& t : pool)
        t.join();
    if (first_error)
        std::rethrow_exception(first_error);
}

ReplicationRecord run_replication(const McScenario& scenario, std::size_t r)
{
    if (r >= scenario.replications)
        throw ArgumentError(fmt::format("replication {} outside 0..{}", r, scenario.replications - 1));
    ReplicationRecord rec;
    rec.index = r;
    try {
        const auto coefs = dgp::table1_dgp(scenario.n_vars);
        const PanelSeries series = dgp::simulate_var(coefs, scenario.n_obs, scenario.burn_in, scenario.base_seed + r);
        const lp::LagSelection sel = lp::select_lag(series, scenario.h_select, scenario.p_max, scenario.config);
        rec.p_hat = sel.per_horizon;

        // Selection horizons that agree on p_hat share one set of fits.
        std::map<std::size_t, std::map<std::size_t, HorizonRecord>> by_lag;
        inference::PipelineOptions opts;
        opts.compute_bands = false;
        for (const auto& [ell, p] : sel.per_horizon) {
            auto& fits = by_lag[p];
            if (fits.empty())
                for (std::size_t h : scenario.horizons) {
                    const auto fit = inference::fit_horizon(series, p, h, 0.9, scenario.config, opts);
                    fits[h] = {fit.step2.impulse_mask(), fit.step2.impulse_block(), fit.debiased.impulse_block()};
                }
            for (const auto& [h, hr] : fits)
                rec.fits[{ell, h}] = hr;
        }
    } catch (const Error& e) {
        rec.failed = true;
        rec.error = e.what();
        rec.p_hat.clear();
        rec.fits.clear();
    }
    return rec;
}

std::map<std::size_t, SelectionRates> metric_selection(const std::vector<ReplicationRecord>& records,
                                                       std::size_t p_true)
{
    std::map<std::size_t, std::array<std::size_t, 3>> counts;
    std::map<std::size_t, std::size_t> totals;
    for (const auto& rec : records) {
        if (rec.failed)
            continue;
        for (const auto& [ell, p] : rec.p_hat) {
            auto& c = counts[ell];
            c[p < p_true ? 0 : (p == p_true ? 1 : 2)] += 1;
            totals[ell] += 1;
        }
    }
    std::map<std::size_t, SelectionRates> out;
    for (const auto& [ell, c] : counts) {
        const double n = static_cast<double>(totals[ell]);
        out[ell] = {static_cast<double>(c[0]) / n, static_cast<double>(c[1]) / n, static_cast<double>(c[2]) / n};
    }
    return out;
}

double metric_sl(const lp::Mask& mask, const Matrix& truth, double tol_zero)
{
    if (mask.rows() != truth.rows() || mask.cols() != truth.cols())
        throw ArgumentError("mask and truth shapes differ");
    std::size_t mismatches = 0;
    for (Eigen::Index i = 0; i < truth.rows(); ++i)
        for (Eigen::Index j = 0; j < truth.cols(); ++j) {
            const bool est_zero = !mask(i, j);
            const bool true_zero = std::abs(truth(i, j)) <= tol_zero;
            mismatches += est_zero != true_zero ? 1 : 0;
        }
    return static_cast<double>(mismatches) / static_cast<double>(truth.size());
}

double spectral_norm(const Matrix& m, double rel_tol)
{
    if (m.size() == 0 || m.cwiseAbs().maxCoeff() == 0.0)
        return 0.0;
    const Matrix gram = m.transpose() * m;
    // Fixed irregular start vector, not aligned with any coordinate pattern.
    Vector v(gram.rows());
    for (Eigen::Index i = 0; i < v.size(); ++i)
        v(i) = 1.0 + 0.5 * std::sin(1.0 + 2.3 * static_cast<double>(i));
    v.normalize();
    double lambda = 0.0;
    for (int it = 0; it < 100000; ++it) {
        Vector next = gram * v;
        const double norm = next.norm();
        if (norm == 0.0)
            return 0.0;
        next /= norm;
        const double fresh = v.dot(gram * v);
        v = std::move(next);
        if (it > 0 && std::abs(fresh - lambda) <= rel_tol * std::abs(fresh))
            return std::sqrt(std::max(0.0, v.dot(gram * v)));
        lambda = fresh;
    }
    return std::sqrt(std::max(0.0, v.dot(gram * v)));
}

double metric_ad(const Matrix& est, const Matrix& truth)
{
    if (est.rows() != truth.rows() || est.cols() != truth.cols())
        throw ArgumentError("estimate and truth shapes differ");
    return spectral_norm(est - truth);
}

namespace {

MetricStat stat_of(const std::vector<double>& xs)
{
    MetricStat s;
    s.count = xs.size();
    if (xs.empty())
        return s;
    double sum = 0.0;
    for (double x : xs)
        sum += x;
    s.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs)
            ss += (x - s.mean) * (x - s.mean);
        s.se = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
    }
    return s;
}

} // namespace

McSummary summarize(const McScenario& scenario, const std::vector<ReplicationRecord>& records)
{
    McSummary sum;
    sum.scenario = scenario;
    sum.selection = metric_selection(records, scenario.p_true);

    std::size_t max_h = 0;
    for (std::size_t h : scenario.horizons)
        max_h = std::max(max_h, h);
    const auto truth = dgp::ma_coefficients(dgp::companion(dgp::table1_dgp(scenario.n_vars)), max_h);

    std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> sl, ad_a, ad_d;
    for (const auto& rec : records) {
        if (rec.failed) {
            ++sum.failures;
            sum.failure_messages.push_back(fmt::format("replication {}: {}", rec.index, rec.error));
            continue;
        }
        ++sum.replications_used;
        for (const auto& [key, hr] : rec.fits) {
            const Matrix& b = truth[key.second];
            sl[key].push_back(metric_sl(hr.mask, b, scenario.tol_zero));
            ad_a[key].push_back(metric_ad(hr.adaptive, b));
            ad_d[key].push_back(metric_ad(hr.debiased, b));
        }
    }
    for (const auto& [key, xs] : sl)
        sum.sl[key] = stat_of(xs);
    for (const auto& [key, xs] : ad_a)
        sum.ad_a[key] = stat_of(xs);
    for (const auto& [key, xs] : ad_d)
        sum.ad_d[key] = stat_of(xs);
    return sum;
}

std::vector<ReplicationRecord> run_replications(const McScenario& scenario, const std::vector<std::size_t>& indices)
{
    std::vector<ReplicationRecord> records(indices.size());
    parallel_for(indices.size(), scenario.workers,
                 [&](std::size_t k) { records[k] = run_replication(scenario, indices[k]); });
    return records;
}

McSummary run_scenario(const McScenario& scenario)
{
    scenario.validate();
    const auto start = std::chrono::steady_clock::now();
    std::vector<std::size_t> indices(scenario.replications);
    for (std::size_t r = 0; r < indices.size(); ++r)
        indices[r] = r;
    const auto records = run_replications(scenario, indices);
    McSummary sum = summarize(scenario, records);
    sum.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (10 * sum.failures > scenario.replications)
        throw ScenarioError(fmt::format("{} of {} replications failed", sum.failures, scenario.replications),
                            sum.failures, scenario.replications);
    return sum;
}

} // namespace hdlp::montecarlo
