#include <doctest.h>

#include <cmath>

#include "sievekit/dgp.hpp"
#include "sievekit/errors.hpp"
#include "sievekit/estimands.hpp"
#include "sievekit/rng.hpp"
#include "sievekit/survival.hpp"

using namespace sievekit;

namespace {

using HazardColumn = std::vector<std::array<double, 2>>;

EventRecord ev(int a, int time, int event) { return EventRecord{a, time, event, {}, 0}; }

// Breslow log partial likelihood written from the definition: competing events leave the
// risk set at the start of their interval, censored subjects stay in theirs.
double reference_loglik(const std::vector<EventRecord>& data, int cause, double beta) {
    double ll = 0;
    for (int t = 1; t <= 64; ++t) {
        double d = 0, d1 = 0, r0 = 0, r1 = 0;
        for (const auto& e : data) {
            if (e.time == t && e.event == cause) {
                d += 1;
                d1 += e.a;
            }
            const bool at_risk = e.time > t || (e.time == t && (e.event == 0 || e.event == cause));
            if (at_risk) (e.a ? r1 : r0) += 1;
        }
        if (d > 0) ll += d1 * beta - d * std::log(r0 + r1 * std::exp(beta));
    }
    return ll;
}

double grid_argmax(const std::vector<EventRecord>& data, int cause) {
    double best = 0, best_ll = -INFINITY;
    for (double b = -8; b <= 8; b += 1e-4) {
        const double ll = reference_loglik(data, cause, b);
        if (ll > best_ll) {
            best_ll = ll;
            best = b;
        }
    }
    double lo = best - 1e-4, hi = best + 1e-4;
    for (int i = 0; i < 100; ++i) {
        const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
        if (reference_loglik(data, cause, m1) < reference_loglik(data, cause, m2))
            lo = m1;
        else
            hi = m2;
    }
    return (lo + hi) / 2;
}

HazardTable random_table(CounterRng& rng, int K) {
    HazardColumn h1(K), h2(K);
    for (int k = 0; k < K; ++k)
        for (int a = 0; a < 2; ++a) {
            const double x = rng.uniform(), y = rng.uniform() * (1 - x);
            h1[k][a] = x;
            h2[k][a] = y;
        }
    return HazardTable::from_hazards(h1, h2);
}

}  // namespace

TEST_CASE("discrete hazards from counts") {
    std::vector<EventRecord> data;
    data.push_back(ev(0, 1, 1));
    for (int i = 0; i < 9; ++i) data.push_back(ev(0, 3, 0));
    for (int i = 0; i < 4; ++i) data.push_back(ev(1, 2, 0));
    const auto h = discrete_hazards(data);
    CHECK(h.hazard(1, 1, 0) == doctest::Approx(0.1));
    CHECK(h.at_risk(1, 0) == 10);
    CHECK(h.at_risk(2, 0) == 9);
    CHECK(h.at_risk(3, 1) == 0);
    for (int k = 1; k <= h.horizon(); ++k)
        for (int a = 0; a < 2; ++a) {
            CHECK(h.hazard(1, k, a) + h.hazard(2, k, a) <= 1.0);
            CHECK(h.survival_factor(k, a) >= 0.0);
            if (k > 1) CHECK(h.at_risk(k, a) <= h.at_risk(k - 1, a));
        }

    std::vector<EventRecord> quiet{ev(0, 2, 0), ev(1, 3, 0)};
    const auto q = discrete_hazards(quiet);
    for (int k = 1; k <= q.horizon(); ++k)
        for (int a = 0; a < 2; ++a) {
            CHECK(q.hazard(1, k, a) == 0.0);
            CHECK(q.survival_factor(k, a) == 1.0);
        }

    std::vector<EventRecord> one_arm{ev(0, 2, 1)};
    CHECK_THROWS_AS(discrete_hazards(one_arm), RiskSetExhausted);
}

TEST_CASE("cumulative incidence recursion") {
    const auto one = cumulative_incidence(HazardTable::from_hazards({{0.2, 0.2}}, {{0.0, 0.0}}));
    CHECK(one.incidence(1, 1, 0) == doctest::Approx(0.2));
    const auto two = cumulative_incidence(HazardTable::from_hazards({{0.1, 0.1}, {0.1, 0.1}}, {{0, 0}, {0, 0}}));
    CHECK(two.incidence(1, 2, 1) == doctest::Approx(0.19).epsilon(1e-14));
    const auto none = cumulative_incidence(HazardTable::from_hazards({{0, 0}, {0, 0}}, {{0, 0}, {0, 0}}));
    CHECK(none.incidence(1, 2, 0) == 0.0);
    CHECK(none.incidence(2, 2, 1) == 0.0);
    CHECK_THROWS_AS(HazardTable::from_hazards({{0.7, 0.1}}, {{0.5, 0.1}}), DomainError);
}

TEST_CASE("conservation and monotone incidence on random tables") {
    CounterRng rng(2024, 1);
    for (int t = 0; t < 100; ++t) {
        const int K = 1 + static_cast<int>(rng.below(20));
        const auto inc = cumulative_incidence(random_table(rng, K));
        for (int k = 1; k <= K; ++k)
            for (int a = 0; a < 2; ++a) {
                CHECK(std::abs(inc.incidence(1, k, a) + inc.incidence(2, k, a) + inc.survival_at(k, a) - 1) <= 1e-12);
                if (k > 1) {
                    CHECK(inc.incidence(1, k, a) >= inc.incidence(1, k - 1, a));
                    CHECK(inc.incidence(2, k, a) >= inc.incidence(2, k - 1, a));
                }
            }
    }
}

TEST_CASE("cce_k") {
    IncidenceTable inc;
    inc.mu[1] = {{0.10, 0.04}};
    inc.mu[2] = {{0.10, 0.06}};
    inc.survival = {{0.8, 0.9}};
    CHECK(cce_k(inc, 1).point == doctest::Approx(2.0 / 3.0));
    const auto same = cumulative_incidence(HazardTable::from_hazards({{0.1, 0.1}}, {{0.05, 0.05}}));
    CHECK(cce_k(same, 1).point == doctest::Approx(1.0));
    inc.mu[1] = {{0.0, 0.04}};
    CHECK_THROWS_AS(cce_k(inc, 1), DegenerateIncidence);
}

TEST_CASE("cse_k nonparametric") {
    // (j=1: arm1 0.02, arm0 0.04; j=2: arm1 0.03, arm0 0.03)
    const auto h = HazardTable::from_hazards({{0.04, 0.02}}, {{0.03, 0.03}});
    CHECK(cse_k_nonparametric(h, 1).point == doctest::Approx(0.5));
    const auto eq = HazardTable::from_hazards({{0.04, 0.02}}, {{0.03, 0.015}});
    CHECK(cse_k_nonparametric(eq, 1).point == doctest::Approx(1.0));
    CHECK(!cse_k_nonparametric(h, 1).has_ci());
}

TEST_CASE("cse_k at K=1 equals the collapsed time-fixed ccs") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        CounterRng rng(seed, 3);
        std::vector<EventRecord> data;
        for (int i = 0; i < 3000; ++i) {
            const int a = static_cast<int>(rng.below(2));
            const double u = rng.uniform();
            data.push_back(ev(a, 1, u < 0.05 ? 1 : (u < 0.12 ? 2 : 0)));
        }
        const auto cse = cse_k_nonparametric(discrete_hazards(data), 1);
        const auto fixed = ccs(tabulate(collapse_to_time_fixed(data)));
        CHECK(cse.point == doctest::Approx(fixed.point).epsilon(1e-13));
    }
}

TEST_CASE("nelson-aalen") {
    std::vector<EventRecord> quiet{ev(0, 2, 0), ev(1, 3, 0)};
    CHECK(nelson_aalen(quiet, 1, {1, 2}).value[0] == 0.0);

    std::vector<EventRecord> data{ev(0, 1, 1)};
    for (int i = 0; i < 9; ++i) data.push_back(ev(0, 2, 0));
    data.push_back(ev(1, 2, 0));
    CHECK(nelson_aalen(data, 1, {1, 1}).value[0] == doctest::Approx(0.1));

    std::vector<EventRecord> short_arm{ev(0, 3, 1), ev(1, 1, 2)};
    CHECK_THROWS_AS(nelson_aalen(short_arm, 1, {1, 3}), RiskSetExhausted);

    const auto spec = builtin_scenario("tte_rare");
    const auto sample_data = sample_events(spec, 20000, 8);
    const auto h = discrete_hazards(sample_data);
    for (int cause : {1, 2})
        for (int a = 0; a < 2; ++a) {
            double prev = 0;
            for (int last = 1; last <= h.horizon(); ++last) {
                const double v = nelson_aalen(h, cause, {1, last}).value[a];
                CHECK(v >= prev);
                prev = v;
            }
        }
}

TEST_CASE("windowed ratio on one interval matches cse_k and its variance") {
    const auto data = sample_events(builtin_scenario("tte_rare"), 60000, 31);
    const auto h = discrete_hazards(data);
    const auto w = windowed_hazard_ratio(h, {2, 2});
    const auto c = cse_k_nonparametric(h, 2);
    CHECK(w.point == doctest::Approx(c.point).epsilon(1e-12));
    CHECK(*w.ci_low == doctest::Approx(*c.ci_low).epsilon(1e-10));
    CHECK(*w.ci_high == doctest::Approx(*c.ci_high).epsilon(1e-10));
    CHECK(w.stratum == "window=2:2");
}

TEST_CASE("windows parse") {
    CHECK(parse_window("3").first == 3);
    CHECK(parse_window("1:4").last == 4);
    const auto ws = parse_windows("1:3,4:6");
    REQUIRE(ws.size() == 2);
    CHECK(ws[1].first == 4);
    CHECK_THROWS(parse_window("a:b"));
}

TEST_CASE("cox beta is zero for exchangeable arms") {
    std::vector<EventRecord> data;
    for (int a = 0; a < 2; ++a)
        for (auto [t, e] : {std::pair{1, 1}, std::pair{2, 2}, std::pair{2, 1}, std::pair{3, 0}, std::pair{4, 1}})
            data.push_back(ev(a, t, e));
    const auto fit = cox_fit(data, 1);
    CHECK(fit.converged);
    CHECK(std::abs(fit.beta) < 1e-10);
}

TEST_CASE("cox matches a grid search of the hand-coded likelihood") {
    const std::vector<EventRecord> toy{ev(1, 1, 1), ev(0, 1, 1), ev(0, 2, 1), ev(1, 3, 0), ev(0, 3, 2), ev(1, 2, 1)};
    const auto fit = cox_fit(toy, 1);
    CHECK(fit.beta == doctest::Approx(grid_argmax(toy, 1)).epsilon(1e-6));
    CHECK(fit.loglik == doctest::Approx(reference_loglik(toy, 1, fit.beta)).epsilon(1e-12));
    for (double b : {-1.0, 0.0, 0.7})
        CHECK(cox_log_partial_likelihood(toy, 1, b) == doctest::Approx(reference_loglik(toy, 1, b)).epsilon(1e-12));
}

TEST_CASE("cox invariance to strictly increasing relabeling of intervals") {
    CounterRng rng(5, 5);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<EventRecord> data;
        for (int i = 0; i < 60; ++i)
            data.push_back(ev(static_cast<int>(rng.below(2)), 1 + static_cast<int>(rng.below(5)),
                              static_cast<int>(rng.below(3))));
        auto relabeled = data;
        for (auto& e : relabeled) e.time = e.time * e.time + 3;
        try {
            const auto a = cox_fit(data, 1);
            const auto b = cox_fit(relabeled, 1);
            CHECK(a.beta == doctest::Approx(b.beta).epsilon(1e-12));
        } catch (const SeparationError&) {
            CHECK_THROWS_AS(cox_fit(relabeled, 1), SeparationError);
        }
    }
}

TEST_CASE("cox separation and score at convergence") {
    std::vector<EventRecord> separated{ev(1, 1, 1), ev(1, 2, 1), ev(0, 3, 0), ev(0, 2, 0)};
    CHECK_THROWS_AS(cox_fit(separated, 1), SeparationError);

    const auto data = sample_events(builtin_scenario("tte_rare"), 20000, 3);
    const auto fit = cox_fit(data, 1);
    REQUIRE(fit.converged);
    const double eps = 1e-6;
    const double score = (cox_log_partial_likelihood(data, 1, fit.beta + eps) -
                          cox_log_partial_likelihood(data, 1, fit.beta - eps)) / (2 * eps);
    CHECK(std::abs(score) < 1e-3);
}

TEST_CASE("rare events: hazard ratio approximates the time-fixed risk ratio") {
    const auto spec = builtin_scenario("tte_rare");
    const auto data = sample_events(spec, 100000, 12);
    const auto fixed = tabulate(collapse_to_time_fixed(data));
    for (int cause : {1, 2}) {
        const auto fit = cox_fit(data, cause);
        CHECK(std::exp(fit.beta) == doctest::Approx(rr(fixed, cause).point).epsilon(0.05));
    }
    const auto cse = cse_cox(data);
    CHECK(cse.point == doctest::Approx(ccs(fixed).point).epsilon(0.05));
    const auto o = oracle(spec);
    REQUIRE(o.cse);
    CHECK(cse.point == doctest::Approx(*o.cse).epsilon(0.15));
}

TEST_CASE("nelson-aalen full horizon tracks the oracle cumulative hazard") {
    const auto spec = builtin_scenario("tte_rare");
    const auto o = oracle(spec);
    const auto data = sample_events(spec, 100000, 77);
    const auto h = discrete_hazards(data);
    const int K = h.horizon();
    for (int a = 0; a < 2; ++a) {
        double total = 0;
        for (int k = 1; k <= K; ++k)
            total += nelson_aalen(h, 1, {k, k}).value[a] + nelson_aalen(h, 2, {k, k}).value[a];
        CHECK(total == doctest::Approx(-std::log(o.survival[K - 1][a])).epsilon(0.05));
    }
}

TEST_CASE("multivariate cox reduces to the scalar fit with one column") {
    const auto data = sample_events(builtin_scenario("tte_rare"), 20000, 4);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(data.size()), 1);
    for (std::size_t i = 0; i < data.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = data[i].a;
    const auto multi = cox_fit_multi(data, 2, x);
    const auto scalar = cox_fit(data, 2);
    CHECK(multi.beta(0) == doctest::Approx(scalar.beta).epsilon(1e-8));
    CHECK(std::sqrt(multi.covariance(0, 0)) == doctest::Approx(scalar.se).epsilon(1e-6));
}
