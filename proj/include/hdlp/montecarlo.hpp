#pragma once

#include "hdlp/core.hpp"
#include "hdlp/lp.hpp"
#include "hdlp/solver.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hdlp::montecarlo {

/// Penalty constants calibrated for the sparse two-lag simulation design
/// (c_gamma = 1.7, c_xi = 4.75); other fields keep their library defaults.
solver::PenaltyConfig simulation_config();

/// One cell of the simulation grid.
struct McScenario
{
    std::size_t n_vars = 20;
    std::size_t n_obs = 300;
    std::size_t replications = 100;
    std::vector<std::size_t> horizons{1, 5, 10};
    std::size_t p_true = 2;
    std::size_t p_max = 5;
    std::vector<std::size_t> h_select{1, 2};
    std::uint64_t base_seed = 1;
    std::size_t burn_in = 500;
    double tol_zero = 0.0;  ///< |b| <= tol_zero counts as a true zero
    std::size_t workers = 1;
    solver::PenaltyConfig config = simulation_config();

    void validate() const;
};

/// A_1-block outputs of one horizon under one selected lag.
struct HorizonRecord
{
    lp::Mask mask;       ///< adaptive nonzero pattern
    Matrix adaptive;     ///< adaptive estimate
    Matrix debiased;     ///< debiased estimate after masking
};

struct ReplicationRecord
{
    std::size_t index = 0;
    bool failed = false;
    std::string error;
    std::map<std::size_t, std::size_t> p_hat;                                    ///< ell -> p_hat
    std::map<std::pair<std::size_t, std::size_t>, HorizonRecord> fits;            ///< (ell, h) -> fit
};

/// Simulates replication r with seed base_seed + r and runs the full pipeline.
ReplicationRecord run_replication(const McScenario& scenario, std::size_t r);

struct SelectionRates
{
    double s_minus = 0.0;
    double s_correct = 0.0;
    double s_plus = 0.0;
};

/// Under / correct / over-selection frequencies per selection horizon.
std::map<std::size_t, SelectionRates> metric_selection(const std::vector<ReplicationRecord>& records,
                                                       std::size_t p_true);

/// Mean absolute disagreement between estimated and true zero patterns.
double metric_sl(const lp::Mask& mask, const Matrix& truth, double tol_zero = 0.0);

/// Spectral norm of est - truth.
double metric_ad(const Matrix& est, const Matrix& truth);

/// Largest singular value by power iteration on D'D.
double spectral_norm(const Matrix& m, double rel_tol = 1e-9);

struct MetricStat
{
    double mean = 0.0;
    double se = 0.0;  ///< Monte Carlo standard error of the mean
    std::size_t count = 0;
};

struct McSummary
{
    McScenario scenario;
    std::map<std::size_t, SelectionRates> selection;                     ///< per ell
    std::map<std::pair<std::size_t, std::size_t>, MetricStat> sl;        ///< (ell, h)
    std::map<std::pair<std::size_t, std::size_t>, MetricStat> ad_a;
    std::map<std::pair<std::size_t, std::size_t>, MetricStat> ad_d;
    std::size_t replications_used = 0;
    std::size_t failures = 0;
    std::vector<std::string> failure_messages;
    double wall_seconds = 0.0;
};

/// Aggregates already-computed records (ordered by index).
McSummary summarize(const McScenario& scenario, const std::vector<ReplicationRecord>& records);

/// Runs all replications on `scenario.workers` threads and summarizes them.
/// More than 10% failures raises ScenarioError.
McSummary run_scenario(const McScenario& scenario);

/// Replications for the given indices, stored in the order given.
std::vector<ReplicationRecord> run_replications(const McScenario& scenario, const std::vector<std::size_t>& indices);

/**
 * Runs fn(0..count-1) on up to `workers` threads. Each index is processed
 * exactly once; exceptions are rethrown after all workers stop.
 */
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn);

} // namespace hdlp::montecarlo
