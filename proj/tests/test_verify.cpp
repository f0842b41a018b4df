#include "mfg/verify.hpp"

#include "mfg/model.hpp"
#include "mfg/numerics.hpp"

#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <utility>
#include <vector>

using namespace mfg;

namespace {

MeanFieldParams table_params() { return load_config("{}").params; }

}  // namespace

TEST_CASE("log-log slope fit: exact power laws") {
    std::vector<std::pair<double, double>> quad;
    for (double n : {8.0, 16.0, 32.0, 64.0}) quad.emplace_back(n, 3.0 / (n * n));
    const SlopeFit f2 = fit_loglog_slope(quad);
    CHECK(f2.slope == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(f2.stderr_slope == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));

    std::vector<std::pair<double, double>> flat = {{10, 0.7}, {100, 0.7}, {1000, 0.7}};
    CHECK(fit_loglog_slope(flat).slope == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

    std::vector<std::pair<double, double>> two = {{10.0, 1.0}, {100.0, 0.1}};
    CHECK(fit_loglog_slope(two).slope == doctest::Approx(-1.0).epsilon(1e-12));

    std::vector<std::pair<double, double>> bad = {{10.0, 1.0}, {100.0, 0.0}};
    CHECK_THROWS_AS(fit_loglog_slope(bad), std::domain_error);
    std::vector<std::pair<double, double>> single = {{10.0, 1.0}};
    CHECK_THROWS_AS(fit_loglog_slope(single), std::invalid_argument);
}

TEST_CASE("spearman rank correlation") {
    std::vector<double> x = {1, 2, 3, 4, 5};
    std::vector<double> up = {0.1, 0.2, 0.5, 0.6, 0.9};
    std::vector<double> dn = {0.9, 0.6, 0.5, 0.2, 0.1};
    std::vector<double> tied = {0.3, 0.3, 0.3, 0.3, 0.3};
    CHECK(spearman(x, up) == doctest::Approx(1.0));
    CHECK(spearman(x, dn) == doctest::Approx(-1.0));
    CHECK(spearman(x, tied) == 0.0);
}

TEST_CASE("gain decay accept rule") {
    RateExperiment e;
    e.metric = RateMetric::NashGain;
    e.rows = {{8, 0.010, 0.001}, {32, 0.004, 0.001}, {128, 0.002, 0.001}};
    e.spearman_nk = -1.0;
    CHECK(gain_decay_acceptable(e));

    e.rows = {{8, 0.001, 0.0005}, {32, 0.0015, 0.0005}, {128, 0.0012, 0.0005}};
    e.spearman_nk = 0.5;  // noisy but inside the 3-se envelope
    CHECK(gain_decay_acceptable(e));

    e.rows = {{8, 0.001, 0.0001}, {32, 0.002, 0.0001}, {128, 0.004, 0.0001}};
    e.spearman_nk = 1.0;
    CHECK_FALSE(gain_decay_acceptable(e));
}

TEST_CASE("intensity experiment: reproducible rows, nonnegative estimates") {
    const MeanFieldParams p = table_params();
    const int ns[] = {8, 16};
    const RateExperiment a = intensity_mse_experiment(p, 0.0, ns, 60, 5, 100);
    const RateExperiment b = intensity_mse_experiment(p, 0.0, ns, 60, 5, 100);
    REQUIRE(a.rows.size() == 2);
    for (size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].value == b.rows[i].value);  // bitwise coupling contract
        CHECK(a.rows[i].se == b.rows[i].se);
        CHECK(a.rows[i].value >= 0.0);
        CHECK(a.rows[i].se >= 0.0);
    }
    CHECK(a.slope == b.slope);
}

TEST_CASE("experiment totals do not depend on the worker count") {
    const MeanFieldParams p = table_params();
    const int ns[] = {8, 16};
    setenv("MFG_THREADS", "1", 1);
    const RateExperiment serial = intensity_mse_experiment(p, 0.0, ns, 80, 9, 100);
    setenv("MFG_THREADS", "3", 1);
    const RateExperiment threaded = intensity_mse_experiment(p, 0.0, ns, 80, 9, 100);
    unsetenv("MFG_THREADS");
    for (size_t i = 0; i < serial.rows.size(); ++i) {
        CHECK(serial.rows[i].value == threaded.rows[i].value);
        CHECK(serial.rows[i].se == threaded.rows[i].se);
    }
    CHECK(serial.slope == threaded.slope);
}

TEST_CASE("intensity experiment: zero rate function gives identically zero error") {
    MeanFieldParams p = table_params();
    p.f = JumpRateFn::custom({0.0, 1.0}, {0.0, 0.0});
    const int ns[] = {4, 8};
    const RateExperiment e = intensity_mse_experiment(p, 0.0, ns, 20, 5, 50);
    for (const auto& r : e.rows) {
        CHECK(r.value == 0.0);
        CHECK(r.se == 0.0);
    }
    CHECK(std::isnan(e.slope));  // no power law to fit on exact zeros
}

TEST_CASE("intensity estimates are stable when the path count quadruples") {
    const MeanFieldParams p = table_params();
    const int ns[] = {8, 16};
    const RateExperiment small = intensity_mse_experiment(p, 0.0, ns, 300, 41, 100);
    const RateExperiment big = intensity_mse_experiment(p, 0.0, ns, 1200, 42, 100);
    for (size_t i = 0; i < small.rows.size(); ++i) {
        const double tol = 3.0 * std::sqrt(small.rows[i].se * small.rows[i].se +
                                           big.rows[i].se * big.rows[i].se);
        CHECK(std::fabs(small.rows[i].value - big.rows[i].value) <= tol);
        CHECK(big.rows[i].se < small.rows[i].se);
    }
}

TEST_CASE("intensity error halves (at least) when the population doubles") {
    const MeanFieldParams p = table_params();
    std::vector<double> ratios;
    for (uint64_t seed = 0; seed < 12; ++seed) {
        const int ns[] = {8, 16};
        const RateExperiment e = intensity_mse_experiment(p, 0.0, ns, 500, 100 + seed, 100);
        ratios.push_back(e.rows[0].value / e.rows[1].value);
    }
    const MeanSe ms = mean_and_se(ratios);
    CHECK(ms.mean >= 2.0 - 3.0 * ms.se);
}

TEST_CASE("nash gain: the zero deviation is computed and is exactly zero") {
    const MeanFieldParams p = table_params();
    const int ns[] = {4, 8};
    DeviationFamily zero_only{DeviationFamily::Kind::ConstantShift, {0.0}};
    const RateExperiment e = nash_gain_experiment(p, 0.0, ns, zero_only, 40, 13, 100);
    for (const auto& r : e.rows) {
        CHECK(r.value == 0.0);
        CHECK(r.se == 0.0);
    }
    CHECK(e.floored == 0);
}

TEST_CASE("nash gain: experiment is reproducible and reports the family metadata") {
    const MeanFieldParams p = table_params();
    const int ns[] = {4, 8};
    const RateExperiment a =
        nash_gain_experiment(p, 0.0, ns, DeviationFamily::constant_shift(), 60, 3, 100);
    const RateExperiment b =
        nash_gain_experiment(p, 0.0, ns, DeviationFamily::constant_shift(), 60, 3, 100);
    REQUIRE(a.rows.size() == b.rows.size());
    for (size_t i = 0; i < a.rows.size(); ++i) CHECK(a.rows[i].value == b.rows[i].value);
    CHECK(a.metric == RateMetric::NashGain);
    for (const auto& r : a.rows) CHECK(r.value >= 0.0);  // zero member floors the max
}

TEST_CASE("deviation family parsing and defaults") {
    CHECK(parse_family("constant-shift").values.front() == 0.0);
    CHECK(parse_family("constant-strategy").values.size() == 10);
    CHECK(parse_family("scaled-mfe").values.size() == 4);
    CHECK_THROWS_AS(parse_family("bogus"), std::invalid_argument);
}

TEST_CASE("overinvestment deviations price strictly negative and get floored") {
    const MeanFieldParams p = table_params();
    const int ns[] = {8, 16};
    DeviationFamily overinvest{DeviationFamily::Kind::ConstantStrategy, {0.9}};
    const RateExperiment e = nash_gain_experiment(p, 0.0, ns, overinvest, 300, 19, 100);
    CHECK(e.floored == 2);  // both maxima were negative before flooring
    for (const auto& r : e.rows) CHECK(r.value == 0.0);
}

TEST_CASE("scaled deviations run through the same coupled pipeline") {
    const MeanFieldParams p = table_params();
    const int ns[] = {4, 8};
    DeviationFamily scaled{DeviationFamily::Kind::ScaledMfe, {0.5, 1.0, 1.5}};
    const RateExperiment e = nash_gain_experiment(p, 0.0, ns, scaled, 40, 23, 80);
    REQUIRE(e.rows.size() == 2);
    for (const auto& r : e.rows) CHECK(r.value >= 0.0);  // the unit scale prices to zero
}

TEST_CASE("wealth experiment rows are reproducible and positive at finite n") {
    const MeanFieldParams p = table_params();
    const int ns[] = {4, 16};
    const RateExperiment a = geom_wealth_mse_experiment(p, 0.0, ns, 50, 77, 100);
    const RateExperiment b = geom_wealth_mse_experiment(p, 0.0, ns, 50, 77, 100);
    REQUIRE(a.rows.size() == 2);
    for (size_t i = 0; i < 2; ++i) {
        CHECK(a.rows[i].value == b.rows[i].value);
        CHECK(a.rows[i].value > 0.0);
    }
    CHECK(a.rows[1].value < a.rows[0].value);
}

TEST_CASE("consistency ratio experiment centers near the half-per-quadrupling law") {
    const MeanFieldParams p = table_params();
    const ConsistencyRatio cr = consistency_ratio_experiment(p, 1500, 8, 314, 250);
    CHECK(cr.ratios.size() == 8);
    for (double r : cr.ratios) CHECK(r > 0.0);
    CHECK(cr.mean_ratio > 1.0);
    CHECK(cr.mean_ratio < 4.0);
}
