#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sievekit/survival.hpp"
#include "sievekit/trial_data.hpp"
#include "sievekit/uncertainty.hpp"

namespace sievekit {

/// Result of a confidence-interval inversion test: reject iff null_value is
/// outside [ci_low, ci_high].
struct TestResult {
    std::string null_id;  ///< strong_sharp_k, h0w or scaled_infection
    double statistic = 0;
    double ci_low = 0;
    double ci_high = 0;
    double null_value = 1;
    double alpha = 0.05;
    bool reject = false;
    /// Set only by tests whose rejection speaks to a sieve effect.
    bool sieve_effect_indicated = false;
    std::string conclusion;
    nlohmann::json detail = nlohmann::json::array();
    std::vector<std::string> assumptions;
    std::vector<std::string> notes;

    nlohmann::json to_json() const;
};

enum class TestCi { Delta, Bootstrap };

TestCi parse_test_ci(const std::string& s);

struct TestOptions {
    double alpha = 0.05;
    TestCi ci = TestCi::Delta;
    BootstrapPlan plan;  ///< used when ci == Bootstrap; its alpha is overridden
    std::size_t lanes = default_lanes();
};

/// Strong sharp null through the ratio of arm-wise hazard ratios at k (or the
/// windowed cumulative-hazard analogue when the window spans several intervals).
TestResult strong_null_test(std::span<const EventRecord> events, Window window, const TestOptions& options = {});

/// Composite no-waning null: per-window cumulative-hazard contrasts with
/// Bonferroni-adjusted intervals at alpha / #windows. Throws TestInfeasible
/// when every window is degenerate.
TestResult h0w_test(std::span<const EventRecord> events, const std::vector<Window>& windows,
                    const TestOptions& options = {});

enum class FalsificationRoute { Nonparametric, Cox };

FalsificationRoute parse_falsification_route(const std::string& s);

struct FalsificationOptions {
    double alpha = 0.05;
    FalsificationRoute route = FalsificationRoute::Nonparametric;
    TestCi ci = TestCi::Bootstrap;  ///< nonparametric route only; the Cox route uses Wald intervals
    BootstrapPlan plan;
    std::string reference_level;  ///< defaults to the first level in sort order
    std::size_t lanes = default_lanes();
};

/// Difference between causes of the covariate log hazard ratios, reference
/// level against each other level with Bonferroni adjustment. The
/// nonparametric route pools arm-by-interval cause-by-level tables with a
/// Mantel-Haenszel odds ratio. Throws TestInfeasible for fewer than two levels.
TestResult scaled_infection_falsification(std::span<const EventRecord> events, const std::string& covariate,
                                          const FalsificationOptions& options = {});

}  // namespace sievekit
