#include <doctest.h>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

#include "sievekit/errors.hpp"
#include "sievekit/rng.hpp"
#include "sievekit/special_functions.hpp"
#include "sievekit/uncertainty.hpp"

using namespace sievekit;

namespace {

double boost_f_quantile(double p, double d1, double d2) {
    return boost::math::quantile(boost::math::fisher_f_distribution<double>(d1, d2), p);
}

// F density integrated numerically; independent of any incomplete-beta code.
double f_cdf_by_quadrature(double x, double d1, double d2) {
    const double logc = std::lgamma((d1 + d2) / 2) - std::lgamma(d1 / 2) - std::lgamma(d2 / 2) +
                        (d1 / 2) * std::log(d1 / d2);
    auto pdf = [&](double t) {
        if (t <= 0) return 0.0;
        return std::exp(logc + (d1 / 2 - 1) * std::log(t) - ((d1 + d2) / 2) * std::log1p(d1 * t / d2));
    };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(pdf, 0.0, x, 15, 1e-13);
}

}  // namespace

TEST_CASE("normal quantile against an independent implementation") {
    boost::math::normal_distribution<double> nd;
    for (double p : {1e-10, 1e-6, 0.001, 0.025, 0.1, 0.3, 0.5, 0.77, 0.975, 0.999, 1 - 1e-9})
        CHECK(normal_quantile(p) == doctest::Approx(boost::math::quantile(nd, p)).epsilon(1e-9));
    CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
}

TEST_CASE("F quantile") {
    CHECK(f_quantile(0.5, 7, 7) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(f_quantile(0.95, 2, 10) == doctest::Approx(4.1028).epsilon(1e-4));
    CHECK(f_cdf_by_quadrature(f_quantile(0.95, 2, 10), 2, 10) == doctest::Approx(0.95).epsilon(1e-9));
    for (double p : {0.01, 0.3, 0.9, 0.975})
        for (auto [d1, d2] : {std::pair{2.0, 10.0}, std::pair{8.0, 4.0}, std::pair{30.0, 60.0}, std::pair{1.0, 1.0}}) {
            const double q = f_quantile(p, d1, d2);
            CHECK(f_cdf(q, d1, d2) == doctest::Approx(p).epsilon(1e-10));
            CHECK(q == doctest::Approx(boost_f_quantile(p, d1, d2)).epsilon(1e-9));
        }
    CHECK_THROWS_AS(f_quantile(0.5, 0, 3), DomainError);
    CHECK_THROWS_AS(f_quantile(0.5, 3, -1), DomainError);
}

TEST_CASE("katz interval matches the closed form") {
    const RiskCells c{50, 1000, 100, 1000};
    const double point = 0.5;
    const double var = (1 - 0.05) / (1000 * 0.05) + (1 - 0.1) / (1000 * 0.1);
    const double z = boost::math::quantile(boost::math::normal_distribution<double>(), 0.975);
    const Interval ci = katz_ci(point, c, 0.05);
    CHECK(ci.lo == doctest::Approx(point * std::exp(-z * std::sqrt(var))).epsilon(1e-10));
    CHECK(ci.hi == doctest::Approx(point * std::exp(z * std::sqrt(var))).epsilon(1e-10));

    const Interval sym = katz_ci(1.0, RiskCells{30, 500, 30, 500}, 0.05);
    CHECK(std::log(sym.lo) == doctest::Approx(-std::log(sym.hi)).epsilon(1e-12));

    const Interval collapsed = katz_ci(point, c, 1 - 1e-12);
    CHECK(collapsed.lo == doctest::Approx(point).epsilon(1e-9));
    CHECK(collapsed.hi == doctest::Approx(point).epsilon(1e-9));

    CHECK_THROWS_AS(katz_ci(1.0, RiskCells{0, 10, 3, 10}, 0.05), DegenerateCounts);
    CHECK_THROWS_AS(katz_ci(1.0, RiskCells{10, 10, 3, 10}, 0.05), DegenerateCounts);
}

TEST_CASE("katz width shrinks as n grows at fixed proportions") {
    double prev = INFINITY;
    for (double m : {1.0, 2.0, 5.0, 10.0, 100.0}) {
        const Interval ci = katz_ci(0.5, RiskCells{5 * m, 100 * m, 10 * m, 100 * m}, 0.05);
        CHECK(ci.width() < prev);
        prev = ci.width();
    }
}

TEST_CASE("ccs sum interval contains the decomposition interval") {
    CounterRng rng(42, 0);
    int checked = 0;
    for (int i = 0; i < 500; ++i) {
        OutcomeCounts n{};
        for (int a = 0; a < 2; ++a) {
            n[a][1] = 1 + static_cast<double>(rng.below(200));
            n[a][2] = 1 + static_cast<double>(rng.below(200));
            n[a][0] = 1 + static_cast<double>(rng.below(3000));
        }
        const Interval s = ccs_ci(n, 0.05, CcsCiMethod::Sum);
        const Interval d = ccs_ci(n, 0.05, CcsCiMethod::Decomposition);
        CHECK(s.lo <= d.lo * (1 + 1e-12));
        CHECK(d.hi <= s.hi * (1 + 1e-12));
        ++checked;
    }
    CHECK(checked == 500);

    const OutcomeCounts sym{{{800, 50, 50}, {800, 50, 50}}};
    for (auto m : {CcsCiMethod::Sum, CcsCiMethod::Decomposition}) {
        const Interval ci = ccs_ci(sym, 0.05, m);
        CHECK(std::log(ci.lo) == doctest::Approx(-std::log(ci.hi)).epsilon(1e-12));
    }
}

TEST_CASE("exposure-conditional interval sums two independent Katz variances") {
    const OutcomeCounts e1{{{300, 40, 0}, {330, 20, 0}}};
    const OutcomeCounts e2{{{200, 0, 30}, {210, 0, 25}}};
    const double p11 = 20.0 / 350, p10 = 40.0 / 340, p21 = 25.0 / 235, p20 = 30.0 / 230;
    const double var = (1 - p11) / (350 * p11) + (1 - p10) / (340 * p10) + (1 - p21) / (235 * p21) +
                       (1 - p20) / (230 * p20);
    const double point = (p11 / p10) / (p21 / p20);
    const double z = boost::math::quantile(boost::math::normal_distribution<double>(), 0.975);
    const Interval ci = ccs_ci_exposure_conditional(e1, e2, 0.05);
    CHECK(ci.lo == doctest::Approx(point * std::exp(-z * std::sqrt(var))).epsilon(1e-10));
    CHECK(ci.hi == doctest::Approx(point * std::exp(z * std::sqrt(var))).epsilon(1e-10));
}

TEST_CASE("trinomial interval against the Boost F-quantile oracle") {
    auto oracle = [](std::int64_t y1, std::int64_t y2, double alpha) {
        const double q = 1 - alpha / 2;
        const double lo = y1 / ((y2 + 1.0) * boost_f_quantile(q, 2.0 * (y2 + 1), 2.0 * y1));
        const double hi = (y1 + 1.0) * boost_f_quantile(q, 2.0 * (y1 + 1), 2.0 * y2) / y2;
        return std::pair{lo, hi};
    };
    const auto [lo, hi] = oracle(4, 2, 0.95);
    const Interval ci = eet_trinomial_ci(4, 2, 0.95);
    CHECK(ci.lo == doctest::Approx(lo).epsilon(1e-8));
    CHECK(ci.hi == doctest::Approx(hi).epsilon(1e-8));

    CHECK(eet_trinomial_ci(17, 17, 0.05).contains(1.0));
    for (auto [y1, y2] : {std::pair{3L, 9L}, std::pair{40L, 12L}, std::pair{1L, 1L}}) {
        const Interval a = eet_trinomial_ci(y1, y2, 0.1);
        const Interval b = eet_trinomial_ci(y2, y1, 0.1);
        CHECK(b.lo == doctest::Approx(1 / a.hi).epsilon(1e-10));
        CHECK(b.hi == doctest::Approx(1 / a.lo).epsilon(1e-10));
        CHECK(a.contains(static_cast<double>(y1) / y2));
    }
    CHECK_THROWS_AS(eet_trinomial_ci(0, 3, 0.05), DegenerateCounts);
}

TEST_CASE("bootstrap contracts") {
    auto mean = [](std::span<const std::size_t> idx) {
        double s = 0;
        for (auto i : idx) s += static_cast<double>(i);
        return s / static_cast<double>(idx.size());
    };
    BootstrapPlan one;
    one.replicates = 1;
    const auto single = bootstrap_ci(20, one, mean, 1);
    CHECK(single.ci.lo == single.ci.hi);
    CHECK(single.ci.lo == single.values.front());

    BootstrapPlan plan;
    plan.replicates = 300;
    plan.master_seed = 99;
    const auto a = bootstrap_ci(50, plan, mean, 1);
    const auto b = bootstrap_ci(50, plan, mean, 1);
    const auto c = bootstrap_ci(50, plan, mean, 8);
    CHECK(a.ci.lo == b.ci.lo);
    CHECK(a.ci.hi == c.ci.hi);
    CHECK(a.values == c.values);
    CHECK(a.ci.lo <= 24.5);
    CHECK(a.ci.hi >= 24.5);

    auto fails = [](std::span<const std::size_t>) -> double { throw DegenerateCounts("always"); };
    CHECK_THROWS_AS(bootstrap_ci(10, plan, fails, 2), BootstrapFailure);
    plan.replicates = 0;
    CHECK_THROWS_AS(bootstrap_ci(10, plan, mean, 1), ConfigurationError);
}
