#include "mfg/model.hpp"

#include "doctest.h"

#include <cmath>
#include <cstring>

using namespace mfg;

TEST_CASE("capped-linear rate function: identity, cap and bridge") {
    const auto fn = JumpRateFn::capped_linear(100.0, 0.01);
    CHECK(eval_f(fn, 0.5) == 0.5);
    CHECK(eval_f(fn, 0.0) == 0.0);
    CHECK(eval_f(fn, 200.0) == 100.01);
    const double mid = eval_f(fn, 100.005);
    CHECK(mid > 100.0);
    CHECK(mid < 100.01);
    CHECK_THROWS_AS(eval_f(fn, -1e-9), std::domain_error);
}

TEST_CASE("rate function is nonnegative, bounded and nondecreasing on a dense grid") {
    const auto fn = JumpRateFn::capped_linear(100.0, 0.01);
    const double hi = 2.0 * (100.0 + 0.01);
    double prev = -1.0;
    for (int i = 0; i <= 10000; ++i) {
        const double x = hi * i / 10000.0;
        const double v = eval_f(fn, x);
        CHECK(v >= 0.0);
        CHECK(v <= 100.01);
        CHECK(v >= prev);
        prev = v;
    }
}

TEST_CASE("rate derivative: regions, finite differences, C1 knots") {
    const auto fn = JumpRateFn::capped_linear(100.0, 0.01);
    CHECK(eval_f_prime(fn, 3.0) == 1.0);
    CHECK(eval_f_prime(fn, 200.0) == 0.0);
    CHECK_THROWS_AS(eval_f_prime(fn, -0.1), std::domain_error);

    const double h = 1e-6;
    auto fd = [&](double x) { return (eval_f(fn, x + h) - eval_f(fn, x - h)) / (2.0 * h); };
    CHECK(std::fabs(eval_f_prime(fn, 100.005) - fd(100.005)) < 1e-6);

    // dense grid avoiding the two knots by +-1e-8
    for (int i = 0; i <= 2000; ++i) {
        const double x = 99.99 + 0.03 * i / 2000.0;
        if (std::fabs(x - 100.0) < 1e-8 || std::fabs(x - 100.01) < 1e-8) continue;
        CHECK(std::fabs(eval_f_prime(fn, x) - fd(x)) < 1e-6);
    }
    // derivative continuous across the knots within 1e-6
    CHECK(std::fabs(eval_f_prime(fn, 100.0 - 1e-9) - eval_f_prime(fn, 100.0 + 1e-9)) < 1e-6);
    CHECK(std::fabs(eval_f_prime(fn, 100.01 - 1e-9) - eval_f_prime(fn, 100.01 + 1e-9)) < 1e-6);
}

TEST_CASE("custom rate table: constant, interpolation, validation") {
    const auto c = JumpRateFn::custom({0.0, 1.0}, {0.25, 0.25});
    CHECK(eval_f(c, 0.0) == 0.25);
    CHECK(eval_f(c, 17.0) == 0.25);
    CHECK(c.max_value() == 0.25);

    const auto ramp = JumpRateFn::custom({0.0, 2.0}, {0.0, 1.0});
    CHECK(eval_f(ramp, 1.0) == doctest::Approx(0.5));
    CHECK(eval_f_prime(ramp, 1.0) == doctest::Approx(0.5));
    CHECK(eval_f(ramp, 5.0) == 1.0);

    CHECK_THROWS_AS(JumpRateFn::custom({0.0, 1.0}, {0.5, 0.25}), ConfigError);
    CHECK_THROWS_AS(JumpRateFn::custom({1.0, 1.0}, {0.0, 0.1}), ConfigError);
}

TEST_CASE("load_config: defaults match the reference parameter set") {
    const Config cfg = load_config("{}");
    const AgentType& o = cfg.params.o;
    CHECK(o.gamma == 0.4);
    CHECK(o.theta == 0.5);
    CHECK(o.sigma == 0.3);
    CHECK(o.sigma0 == 0.2);
    CHECK(o.b == 0.2);
    CHECK(o.lambda0 == 0.1);
    CHECK(o.lambda_inf == 0.6);
    CHECK(o.alpha == 0.5);
    CHECK(o.beta == 0.4);
    CHECK(o.varsigma == 0.2);
    CHECK(cfg.params.eps0 == 1e-10);
    CHECK(cfg.params.r == 0.0);
    CHECK(cfg.params.T == 10.0);
    CHECK(cfg.params.f.cap_threshold() == 100.0);
    CHECK(cfg.params.f.smoothing_width() == 0.01);
}

TEST_CASE("load_config: constraint violations carry the field path") {
    CHECK_THROWS_WITH_AS(load_config(R"({"limiting_type":{"gamma":1.2}})"),
                         "limiting_type.gamma: must be in (0,1)", ConfigError);
    CHECK_THROWS_AS(load_config(R"({"run":{"time_steps":1}})"), ConfigError);
    CHECK_THROWS_AS(load_config("not json"), ConfigError);
    CHECK_THROWS_AS(load_config(R"({"market":{"T":-1}})"), ConfigError);
}

TEST_CASE("population: Dirac case and deterministic jitter") {
    const Config cfg = load_config(R"({"population":{"n":4}})");
    REQUIRE(cfg.population.agents.size() == 4);
    for (const auto& a : cfg.population.agents) {
        CHECK(a.gamma == cfg.params.o.gamma);
        CHECK(a.lambda0 == cfg.params.o.lambda0);
        CHECK(a.b == cfg.params.o.b);
    }

    const auto pop = PopulationSpec::make(cfg.params.o, 8, 0.5);
    CHECK_FALSE(pop.homogeneous());
    double mean_b = 0.0;
    for (int i = 0; i < 8; ++i) {
        const double c = (i % 2 == 0) ? 1.0 : -1.0;
        CHECK(pop.agents[i].b == doctest::Approx(cfg.params.o.b * (1.0 + 0.5 * c / 8.0)));
        mean_b += pop.agents[i].b;
    }
    // alternating signs cancel: the empirical mean stays at the limiting type
    CHECK(mean_b / 8.0 == doctest::Approx(cfg.params.o.b).epsilon(1e-12));
}

TEST_CASE("config round-trip is bitwise for floating fields") {
    const Config cfg = load_config(
        R"({"limiting_type":{"gamma":0.3333333333333333,"sigma":0.123456789012345},
            "market":{"T":7.77,"r":0.015},"run":{"seed":987654321,"time_steps":321}})");
    const Config back = load_config(serialize_config(cfg));
    CHECK(std::memcmp(&cfg.params.o, &back.params.o, sizeof(AgentType)) == 0);
    CHECK(cfg.params.r == back.params.r);
    CHECK(cfg.params.T == back.params.T);
    CHECK(cfg.params.eps0 == back.params.eps0);
    CHECK(cfg.run.seed == back.run.seed);
    CHECK(cfg.run.time_steps == back.run.time_steps);
    CHECK(config_digest(cfg) == config_digest(back));
}

TEST_CASE("config digest separates configurations") {
    const Config a = load_config("{}");
    const Config b = load_config(R"({"limiting_type":{"gamma":0.41}})");
    CHECK(config_digest(a) != config_digest(b));
    CHECK(digest_hex(config_digest(a)).size() == 16);
}
