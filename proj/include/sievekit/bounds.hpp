#pragma once

#include <array>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sievekit/trial_data.hpp"

namespace sievekit {

/// Outcome probabilities P(Y=j|A=a).
struct OutcomeProbabilities {
    double y1_a0 = 0;  ///< P(Y=1|A=0)
    double y1_a1 = 0;  ///< P(Y=1|A=1)
    double y2_a0 = 0;  ///< P(Y=2|A=0)
    double y2_a1 = 0;  ///< P(Y=2|A=1)

    /// Order (P(Y=1|A=0), P(Y=1|A=1), P(Y=2|A=0), P(Y=2|A=1)).
    static OutcomeProbabilities from_array(const std::array<double, 4>& p) { return {p[0], p[1], p[2], p[3]}; }
    /// Empirical proportions of a count table (exposure-B rows removed).
    static OutcomeProbabilities from_counts(const CellCounts& counts);
};

struct IntervalBound {
    double lo = 0;
    double hi = 0;
    std::string target;  ///< "acece_ratio" or "ve_ratio"
    bool point_identified = false;
    std::vector<std::string> notes;

    bool contains(double v) const { return lo <= v && v <= hi; }
    nlohmann::json to_json() const;
};

/// Sharp bounds on the ratio of absolute exposure-conditional effects under a
/// protective effect on both variants. Throws OutOfRegime when either
/// P(Y=j|A=0) > P(Y=j|A=1) fails and DomainError for probabilities outside (0,1].
IntervalBound acece_ratio_bounds(const OutcomeProbabilities& p);

/// Baseline exposure-conditional risks P(Y^{a=0}=j|E=j), given as a point or
/// as intervals.
struct BaselineRisks {
    std::array<double, 2> variant1{};  ///< [min, max] of P(Y^{a=0}=1|E=1)
    std::array<double, 2> variant2{};  ///< [min, max] of P(Y^{a=0}=2|E=2)
    std::string source = "supplied";

    static BaselineRisks point(double v1, double v2, std::string source = "supplied") {
        return {{v1, v1}, {v2, v2}, std::move(source)};
    }
};

/// acece bounds rescaled by P(Y^{a=0}=2|E=2) / P(Y^{a=0}=1|E=1); interval
/// baselines widen the result to the extreme ratios.
IntervalBound ve_ratio_bounds(const OutcomeProbabilities& p, const BaselineRisks& baseline);

}  // namespace sievekit
