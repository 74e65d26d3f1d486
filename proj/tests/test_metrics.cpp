#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "hexcast/metrics.hpp"
#include "oracles.hpp"

using namespace hexcast;
using metrics::compute_metrics;
using metrics::welch_t_test;

namespace {

// Two-sided tail probability of the t distribution by direct integration
// of the density over [-t, t].
double t_two_sided_by_quadrature(double t, double df) {
    const double ln_norm = std::lgamma(0.5 * (df + 1.0)) -
                           std::lgamma(0.5 * df) -
                           0.5 * std::log(df * M_PI);
    const auto density = [&](double u) {
        return std::exp(ln_norm -
                        0.5 * (df + 1.0) * std::log1p(u * u / df));
    };
    const double inner =
        oracles::adaptive_simpson(density, -std::abs(t), std::abs(t), 1e-12);
    return 1.0 - inner;
}

DemandTensor tiny_tensor(int n_cols, int n_rows, int n_intervals,
                         int interval_min) {
    DemandTensor t;
    t.kind = DemandKind::departure;
    t.shape = GridShape::hex;
    t.spatial_m = 800.0;
    t.interval_min = interval_min;
    t.t0 = 0;
    t.n_intervals = n_intervals;
    t.grid = GridIndex{-(n_cols / 2), n_rows / 2, n_cols, n_rows, true};
    t.values.assign(static_cast<int64_t>(t.n_cells()) * n_intervals, 0.0);
    return t;
}

}  // namespace

TEST_CASE("point metrics") {
    SUBCASE("error magnitudes and normalisation") {
        // Errors +-8.82 on nonzero targets.
        const std::vector<double> preds{108.82, 91.18};
        const std::vector<double> targets{100.0, 100.0};
        const auto r = compute_metrics(preds, targets, 0.0, 859.0);
        CHECK(r.rmse == doctest::Approx(8.82).epsilon(1e-12));
        CHECK(r.nrmse == doctest::Approx(8.82 / 859.0).epsilon(1e-9));
        CHECK(std::abs(r.nrmse - 0.010268) < 1e-6);
        CHECK(r.n == 2);
        CHECK(r.n_mape_excluded == 0);
    }

    SUBCASE("worked example") {
        const auto r = compute_metrics({2.0, 2.0}, {1.0, 4.0}, 0.0, 4.0);
        CHECK(r.rmse == doctest::Approx(std::sqrt(2.5)).epsilon(1e-12));
        CHECK(r.rmse == doctest::Approx(1.5811).epsilon(1e-4));
        CHECK(r.mape == doctest::Approx(0.75).epsilon(1e-12));
        CHECK(r.nrmse == doctest::Approx(std::sqrt(2.5) / 4.0));
    }

    SUBCASE("zero targets are excluded from the relative error") {
        const auto r = compute_metrics({1.0, 3.0, 5.0}, {0.0, 3.0, 4.0},
                                       0.0, 10.0);
        CHECK(r.n_mape_excluded == 1);
        CHECK(r.mape == doctest::Approx(0.5 * (0.0 + 0.25)));
        const auto all_zero =
            compute_metrics({1.0, 2.0}, {0.0, 0.0}, 0.0, 5.0);
        CHECK(all_zero.mape == 0.0);
        CHECK(all_zero.n_mape_excluded == 2);
    }

    SUBCASE("validation") {
        CHECK_THROWS_AS(compute_metrics({1.0}, {1.0, 2.0}, 0.0, 1.0),
                        ShapeError);
        CHECK_THROWS_AS(compute_metrics({}, {}, 0.0, 1.0), ConfigError);
        CHECK_THROWS_AS(compute_metrics({1.0}, {1.0}, 2.0, 1.0), ConfigError);
        const auto flat = compute_metrics({1.0}, {2.0}, 3.0, 3.0);
        CHECK(flat.nrmse == 0.0);
    }

    SUBCASE("value_range scans the whole tensor") {
        DemandTensor t = tiny_tensor(2, 2, 3, 30);
        t.at(1, 2) = 7.0;
        t.at(3, 0) = -1.0;
        const auto [lo, hi] = metrics::value_range(t);
        CHECK(lo == -1.0);
        CHECK(hi == 7.0);
    }
}

TEST_CASE("incomplete beta and t tails match direct quadrature") {
    const double cases[][2] = {{0.5, 3.0},  {1.0, 5.0},  {2.5, 3.7},
                               {0.2, 30.0}, {4.0, 12.0}, {1.7, 1.5}};
    for (const auto& c : cases) {
        const double p = metrics::student_t_two_sided_p(c[0], c[1]);
        const double want = t_two_sided_by_quadrature(c[0], c[1]);
        CHECK(std::abs(p - want) < 1e-8);
    }
    CHECK(metrics::student_t_two_sided_p(0.0, 7.0) == doctest::Approx(1.0));
    CHECK(metrics::reg_incomplete_beta(2.0, 3.0, 0.0) == 0.0);
    CHECK(metrics::reg_incomplete_beta(2.0, 3.0, 1.0) == 1.0);
    // Closed form for integer parameters: I_x(1, b) = 1 - (1-x)^b.
    CHECK(metrics::reg_incomplete_beta(1.0, 4.0, 0.3) ==
          doctest::Approx(1.0 - std::pow(0.7, 4.0)).epsilon(1e-12));
    CHECK_THROWS_AS(metrics::reg_incomplete_beta(0.0, 1.0, 0.5), ConfigError);
}

TEST_CASE("welch t test") {
    SUBCASE("identical samples give t = 0, p = 1") {
        const std::vector<double> a{1.0, 2.0, 3.0};
        const auto r = welch_t_test(a, a);
        CHECK(r.t == 0.0);
        CHECK(r.p == doctest::Approx(1.0));
    }

    SUBCASE("statistic and tail match an independent computation") {
        const std::vector<double> a{1.0, 2.0, 3.0, 4.0};
        const std::vector<double> b{2.0, 4.0, 6.0, 8.0, 10.0};
        const auto r = welch_t_test(a, b);
        // Hand recomputation of the statistic and degrees of freedom.
        const double va = 5.0 / 3.0, vb = 10.0;
        const double se2 = va / 4.0 + vb / 5.0;
        CHECK(r.t == doctest::Approx((2.5 - 6.0) / std::sqrt(se2)));
        const double df_want =
            se2 * se2 / (va * va / (16.0 * 3.0) + vb * vb / (25.0 * 4.0));
        CHECK(r.df == doctest::Approx(df_want));
        CHECK(r.p ==
              doctest::Approx(t_two_sided_by_quadrature(r.t, r.df))
                  .epsilon(1e-8));
    }

    SUBCASE("well separated samples are significant") {
        std::vector<double> a, b;
        Rng rng(4);
        std::normal_distribution<double> jitter(0.0, 1e-9);
        for (int i = 0; i < 8; ++i) {
            a.push_back(jitter(rng));
            b.push_back(100.0 + jitter(rng));
        }
        CHECK(welch_t_test(a, b).p < 1e-6);
    }

    SUBCASE("degenerate inputs") {
        CHECK_THROWS_AS(welch_t_test({1.0}, {1.0, 2.0}), ConfigError);
        CHECK_THROWS_AS(welch_t_test({2.0, 2.0}, {3.0, 3.0}), DataError);
        const auto same = welch_t_test({2.0, 2.0}, {2.0, 2.0});
        CHECK(same.p == 1.0);
    }
}

TEST_CASE("cross_validate on classical baselines") {
    // Four cells, 30 days of two intervals each; demand follows a fixed
    // daily pattern plus a per-day trend so the slot mean is informative.
    DemandTensor t = tiny_tensor(2, 2, 60, 720);
    for (int cell = 0; cell < 4; ++cell)
        for (int day = 0; day < 30; ++day) {
            t.at(cell, 2 * day) = 4.0 + cell + (day % 3);
            t.at(cell, 2 * day + 1) = 9.0 + cell;
        }
    metrics::CvConfig cfg;
    cfg.model_ids = {"ha", "arima"};
    cfg.reference = "ha";
    cfg.splits = {0, 1};
    cfg.model.h = 2;
    cfg.arima_max_order = 2;
    const auto res = metrics::cross_validate(t, cfg);
    REQUIRE(res.cells.size() == 4);
    for (const auto& cell : res.cells) {
        CHECK(std::isfinite(cell.report.rmse));
        CHECK(cell.report.n > 0);
        CHECK(cell.report.rmse < 5.0);
    }
    REQUIRE(res.models.size() == 2);
    CHECK(res.models[0].model == "ha");
    CHECK(res.models[0].p_mape_vs_ref == 1.0);  // reference vs itself
    CHECK(res.models[1].p_mape_vs_ref <= 1.0);
    // The slot means are exact for the constant evening slot, so HA stays
    // accurate.
    CHECK(res.models[0].mean_rmse < 1.5);

    // Determinism: a second run produces identical metrics.
    const auto res2 = metrics::cross_validate(t, cfg);
    for (size_t i = 0; i < res.cells.size(); ++i) {
        CHECK(res.cells[i].report.rmse == res2.cells[i].report.rmse);
        CHECK(res.cells[i].report.mape == res2.cells[i].report.mape);
    }

    metrics::CvConfig bad = cfg;
    bad.model_ids = {"nosuch"};
    CHECK_THROWS_AS(metrics::cross_validate(t, bad), ConfigError);
}

TEST_CASE("historical average slot means") {
    DemandTensor t = tiny_tensor(1, 1, 6, 720);
    t.at(0, 0) = 1.0;
    t.at(0, 1) = 2.0;
    t.at(0, 2) = 3.0;
    t.at(0, 3) = 4.0;
    t.at(0, 4) = 5.0;
    t.at(0, 5) = 6.0;
    CHECK(models::ha_forecast(t, {0, 1}, 0, 4) == doctest::Approx(2.0));
    CHECK(models::ha_forecast(t, {0, 1}, 0, 5) == doctest::Approx(3.0));
    CHECK(models::ha_forecast(t, {0}, 0, 2) == doctest::Approx(1.0));
    CHECK_THROWS_AS(models::ha_forecast(t, {}, 0, 4), ConfigError);
}
