#include <doctest.h>

#include <cmath>

#include "sievekit/dgp.hpp"
#include "sievekit/errors.hpp"
#include "sievekit/rng.hpp"
#include "sievekit/survival.hpp"

using namespace sievekit;

TEST_CASE("builtin scenario parameters") {
    const auto d3 = builtin_scenario("d3");
    CHECK(d3.exposure_law[1][0] == doctest::Approx(3.0 / 6));
    CHECK(d3.exposure_law[1][1] == doctest::Approx(1.0 / 6));
    CHECK(d3.exposure_law[1][2] == doctest::Approx(2.0 / 6));
    CHECK(builtin_scenario("d3_noratio").exposure_law == d3.exposure_law);

    const auto d1 = builtin_scenario("d1");
    // expit(-2 + 2) for exposure, times the untreated factor expit(0).
    CHECK(exposure_conditional_risk(d1, 1, 0) == doctest::Approx(expit(0) * expit(0)));
    CHECK(exposure_conditional_risk(d1, 1, 1) == doctest::Approx(expit(0) * expit(-3)));
    const auto d4 = builtin_scenario("d4");
    CHECK(d4.exposure_law[0][0] + d4.exposure_law[0][1] + d4.exposure_law[0][2] == doctest::Approx(1.0));

    for (const auto& id : builtin_scenario_ids()) {
        const auto s = builtin_scenario(id);
        for (const auto& row : s.exposure_law) {
            CHECK(row[0] + row[1] + row[2] == doctest::Approx(1.0).epsilon(1e-15));
            for (double v : row) CHECK((v >= 0 && v <= 1));
        }
    }
    CHECK_THROWS_AS(builtin_scenario("d9"), ConfigurationError);
}

TEST_CASE("spec json round-trip and validation") {
    for (const auto& id : builtin_scenario_ids()) {
        const auto s = builtin_scenario(id);
        const nlohmann::json j = s;
        const auto back = j.get<DgpSpec>();
        CHECK(nlohmann::json(back) == j);
    }
    auto bad = builtin_scenario("d1");
    bad.exposure_law[0][0] = 0.9;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("oracle values") {
    const auto o1 = oracle(builtin_scenario("d1"));
    CHECK(o1.true_ccs == 1.0);
    CHECK(o1.observed_limit_ccs == doctest::Approx(1.0).epsilon(1e-14));

    CHECK(oracle(builtin_scenario("d2")).observed_limit_ccs == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(oracle(builtin_scenario("d3")).observed_limit_ccs == doctest::Approx(0.25).epsilon(1e-14));

    const double sigma_ratio = expit(0) / expit(-1);
    CHECK(sigma_ratio == doctest::Approx(1.8584).epsilon(1e-3));
    const auto o4 = oracle(builtin_scenario("d4"));
    CHECK(o4.observed_limit_eet == doctest::Approx(sigma_ratio).epsilon(1e-12));
    const auto o5 = oracle(builtin_scenario("d5"));
    CHECK(o5.observed_limit_eet == doctest::Approx(2 * sigma_ratio).epsilon(1e-12));
    CHECK(o5.treated_exposure_ratio == doctest::Approx(2.0));
}

TEST_CASE("observed limit equals the true ccs whenever exposure ratios are unaffected by treatment") {
    CounterRng rng(8, 8);
    for (int i = 0; i < 40; ++i) {
        DgpSpec s;
        s.beta0 = -3 + rng.uniform();
        s.beta_e = {0, rng.uniform() * 2 - 1, rng.uniform() * 2 - 1};
        s.beta_ea = {-rng.uniform() * 3, -rng.uniform() * 3};
        const double e1 = 0.1 + 0.4 * rng.uniform(), e2 = 0.1 + 0.4 * rng.uniform();
        const double scale = 0.5 + rng.uniform();  // same ratio e1/e2 in both arms, different E=0 mass
        const double f1 = e1 * scale / (1 + scale), f2 = e2 * scale / (1 + scale);
        s.exposure_law = {{{1 - e1 - e2, e1, e2}, {1 - f1 - f2, f1, f2}}};
        s.validate();
        const auto o = oracle(s);
        CHECK(o.observed_limit_ccs == doctest::Approx(o.true_ccs).epsilon(1e-12));
    }
}

TEST_CASE("tte oracle constants") {
    const auto s = builtin_scenario("tte_rare");
    const auto o = oracle(s);
    REQUIRE(o.gamma);
    REQUIRE(o.cse);
    CHECK(*o.cse == doctest::Approx(0.6 / 0.9).epsilon(1e-14));
    CHECK(*o.cse == doctest::Approx((*o.gamma)[1] / (*o.gamma)[0]).epsilon(1e-14));
    for (const auto& row : o.marginal_hazard[1])
        for (double h : row) CHECK(h <= 0.01);

    auto varying = s;
    varying.tte->confounder[1].cause_multiplier = {2.0, 1.0};
    CHECK(!oracle(varying).cse.has_value());
}

TEST_CASE("sampling is deterministic and lane-invariant") {
    const auto s = builtin_scenario("d2");
    CHECK_THROWS(sample(s, 0, 1));
    CHECK(sample(s, 1, 4) == sample(s, 1, 4));
    CHECK(sample(s, 5000, 9, 1) == sample(s, 5000, 9, 8));
    const auto t = builtin_scenario("tte_rare");
    CHECK(sample_events(t, 3000, 2, 1) == sample_events(t, 3000, 2, 3));
}

TEST_CASE("sampled frequencies match closed forms") {
    const auto d1 = sample(builtin_scenario("d1"), 1000000, 61);
    double n0 = 0, y1 = 0;
    for (const auto& r : d1)
        if (r.a == 0) {
            n0 += 1;
            y1 += r.y == 1;
        }
    const double p = 1.0 / 12;
    CHECK(std::abs(y1 / n0 - p) < 3 * std::sqrt(p * (1 - p) / n0));

    const auto d5 = sample(builtin_scenario("d5"), 1000000, 62);
    double e1 = 0, e2 = 0;
    for (const auto& r : d5)
        if (r.a == 1) {
            e1 += *r.e == Exposure::Variant1;
            e2 += *r.e == Exposure::Variant2;
        }
    CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("sampled tte hazards match the oracle") {
    const auto s = builtin_scenario("tte_rare");
    const auto o = oracle(s);
    const auto h = discrete_hazards(sample_events(s, 100000, 5));
    for (int k = 1; k <= 3; ++k)
        for (int a = 0; a < 2; ++a)
            for (int j = 1; j <= 2; ++j) {
                const double truth = o.marginal_hazard[j][k - 1][a];
                const double se = std::sqrt(truth * (1 - truth) / static_cast<double>(h.at_risk(k, a)));
                CHECK(std::abs(h.hazard(j, k, a) - truth) < 4 * se);
            }
}

TEST_CASE("multi-exposure probability") {
    CHECK(multi_exposure_probability(0, 5) == 0.0);
    CHECK(multi_exposure_probability(0.3, 1) == 0.0);
    CHECK(multi_exposure_probability(1, 2) == doctest::Approx(1.0));
    const double v = multi_exposure_probability(0.0036, 5);
    CHECK(v == doctest::Approx(1 - std::pow(1 - 0.0036, 5) - 5 * 0.0036 * std::pow(1 - 0.0036, 4)).epsilon(1e-12));
}

TEST_CASE("convergence study shape and lane invariance") {
    const auto s = builtin_scenario("d1");
    const auto a = run_convergence_study(s, {2000, 4000}, 5, {"ccs_observed", "rr1"}, 3, 1);
    const auto b = run_convergence_study(s, {2000, 4000}, 5, {"ccs_observed", "rr1"}, 3, 4);
    CHECK(a.rows.size() == 2 * 5 * 2);
    CHECK(a.summary.size() == 4);
    CHECK(a.to_json() == b.to_json());
    for (const auto& row : a.summary)
        if (row.estimator == "ccs_observed") CHECK(row.oracle == doctest::Approx(1.0));
}
