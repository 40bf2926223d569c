#include "hdlp/errors.hpp"
#include "hdlp/montecarlo.hpp"

#include <doctest.h>

#include <atomic>
#include <random>
#include <stdexcept>

using namespace hdlp;
using namespace hdlp::montecarlo;

namespace {

McScenario small()
{
    McScenario s;
    s.n_vars = 6;
    s.n_obs = 120;
    s.replications = 6;
    s.horizons = {1, 3};
    s.h_select = {1, 2};
    s.p_max = 3;
    s.base_seed = 40;
    return s;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j)
            m(i, j) = z(rng);
    return m;
}

} // namespace

TEST_CASE("simulation constants")
{
    const auto c = simulation_config();
    CHECK(c.gamma_scale == 1.7);
    CHECK(c.xi_scale == 4.75);
    CHECK(c.eta_scale == solver::PenaltyConfig{}.eta_scale);
    CHECK(McScenario{}.config.gamma_scale == 1.7);
}

TEST_CASE("scenario validation")
{
    auto s = small();
    CHECK_NOTHROW(s.validate());
    s.n_vars = 7;
    CHECK_THROWS_AS(s.validate(), ArgumentError);
    s = small();
    s.replications = 0;
    CHECK_THROWS_AS(s.validate(), ArgumentError);
    s = small();
    s.horizons = {60};
    CHECK_THROWS_AS(s.validate(), ArgumentError);
    s = small();
    s.h_select.clear();
    CHECK_THROWS_AS(s.validate(), ArgumentError);
    CHECK_THROWS_AS(run_replication(small(), 6), ArgumentError);
}

TEST_CASE("sparsity loss")
{
    Matrix truth = Matrix::Zero(3, 3);
    truth(0, 0) = 0.5;
    truth(1, 2) = -0.2;
    lp::Mask none = lp::Mask::Constant(3, 3, false);
    CHECK(metric_sl(none, truth) == doctest::Approx(2.0 / 9.0));
    lp::Mask all = lp::Mask::Constant(3, 3, true);
    CHECK(metric_sl(all, truth) == doctest::Approx(7.0 / 9.0));
    lp::Mask exact = truth.array() != 0.0;
    CHECK(metric_sl(exact, truth) == 0.0);
    CHECK(metric_sl(none, truth, 0.3) == doctest::Approx(1.0 / 9.0));
    CHECK_THROWS_AS(metric_sl(lp::Mask::Constant(2, 3, false), truth), ArgumentError);
}

TEST_CASE("spectral norm agrees with the svd")
{
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Matrix m = random_matrix(8, 8, seed);
        const double ref = Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
        CHECK(spectral_norm(m) == doctest::Approx(ref).epsilon(1e-7));
    }
    CHECK(spectral_norm(Matrix::Zero(4, 4)) == 0.0);
    Matrix d = Matrix::Zero(3, 3);
    d.diagonal() << 1.0, -3.0, 2.0;
    CHECK(spectral_norm(d) == doctest::Approx(3.0));
    const Matrix a = random_matrix(5, 5, 30), b = random_matrix(5, 5, 31);
    CHECK(metric_ad(a, b) == doctest::Approx(spectral_norm(a - b)));
    CHECK(metric_ad(a, a) == 0.0);
    CHECK_THROWS_AS(metric_ad(a, Matrix::Zero(4, 5)), ArgumentError);
}

TEST_CASE("parallel loop")
{
    for (std::size_t workers : {1u, 3u, 8u}) {
        std::vector<int> hits(101, 0);
        parallel_for(101, workers, [&](std::size_t i) { hits[i] += 1; });
        CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    }
    std::atomic<int> calls{0};
    CHECK_THROWS_AS(parallel_for(20, 4,
                                 [&](std::size_t i) {
                                     ++calls;
                                     if (i == 7)
                                         throw std::runtime_error("boom");
                                 }),
                    std::runtime_error);
    parallel_for(0, 4, [](std::size_t) { FAIL("no work expected"); });
}

TEST_CASE("replication contents")
{
    const auto s = small();
    const auto rec = run_replication(s, 2);
    CHECK(rec.index == 2);
    CHECK(!rec.failed);
    CHECK(rec.p_hat.size() == 2);
    for (const auto& [ell, p] : rec.p_hat) {
        CHECK(p >= 1);
        CHECK(p <= s.p_max);
        for (std::size_t h : s.horizons) {
            const auto& fit = rec.fits.at({ell, h});
            CHECK(fit.adaptive.rows() == 6);
            CHECK(fit.adaptive.cols() == 6);
            CHECK(fit.debiased.rows() == 6);
            for (Eigen::Index i = 0; i < 6; ++i)
                for (Eigen::Index j = 0; j < 6; ++j)
                    if (!fit.mask(i, j)) {
                        CHECK(fit.adaptive(i, j) == 0.0);
                        CHECK(fit.debiased(i, j) == 0.0);
                    }
        }
    }
    const auto again = run_replication(s, 2);
    CHECK(again.p_hat == rec.p_hat);
    CHECK(again.fits.at({1, 3}).debiased == rec.fits.at({1, 3}).debiased);
}

TEST_CASE("scenario summary")
{
    auto s = small();
    const auto a = run_scenario(s);
    CHECK(a.replications_used == 6);
    CHECK(a.failures == 0);
    for (const auto& [ell, r] : a.selection)
        CHECK(r.s_minus + r.s_correct + r.s_plus == doctest::Approx(1.0));
    CHECK(a.sl.size() == 4);
    CHECK(a.ad_a.at({1, 1}).count == 6);
    CHECK(a.sl.at({2, 3}).mean >= 0.0);
    CHECK(a.sl.at({2, 3}).mean <= 1.0);

    s.workers = 4;
    const auto b = run_scenario(s);
    CHECK(b.sl.at({1, 3}).mean == a.sl.at({1, 3}).mean);
    CHECK(b.ad_d.at({2, 1}).mean == a.ad_d.at({2, 1}).mean);
    CHECK(b.ad_d.at({2, 1}).se == a.ad_d.at({2, 1}).se);

    auto one = small();
    one.replications = 1;
    const auto single = run_scenario(one);
    CHECK(single.replications_used == 1);
    CHECK(single.ad_a.at({1, 1}).se == 0.0);
}

TEST_CASE("summary of precomputed records")
{
    const auto s = small();
    const auto recs = run_replications(s, {0, 1, 2, 3, 4, 5});
    const auto sum = summarize(s, recs);
    const auto direct = run_scenario(s);
    CHECK(sum.ad_a.at({1, 3}).mean == direct.ad_a.at({1, 3}).mean);

    std::vector<ReplicationRecord> fake(4);
    for (std::size_t r = 0; r < 4; ++r) {
        fake[r].index = r;
        fake[r].p_hat[1] = r < 1 ? 1 : (r < 3 ? 2 : 3);
    }
    const auto rates = metric_selection(fake, 2).at(1);
    CHECK(rates.s_minus == 0.25);
    CHECK(rates.s_correct == 0.5);
    CHECK(rates.s_plus == 0.25);
}

TEST_CASE("failing replications abort the scenario")
{
    auto s = small();
    s.config.max_iter = 1;
    s.config.tol = 1e-14;
    CHECK_THROWS_AS(run_scenario(s), ScenarioError);
    const auto rec = run_replication(s, 0);
    CHECK(rec.failed);
    CHECK(!rec.error.empty());
}
