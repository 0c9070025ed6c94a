#include "sievekit/bounds.hpp"

#include <cmath>

#include "sievekit/errors.hpp"
#include "sievekit/format.hpp"

namespace sievekit {

namespace {

void check_probability(double v, const char* name) {
    if (!(v > 0 && v <= 1)) throw DomainError(std::string(name) + " must lie in (0, 1], got " + std::to_string(v));
}

}  // namespace

OutcomeProbabilities OutcomeProbabilities::from_counts(const CellCounts& counts) {
    const auto n = counts.unique_exposure_counts();
    const double t0 = static_cast<double>(n[0][0] + n[0][1] + n[0][2]);
    const double t1 = static_cast<double>(n[1][0] + n[1][1] + n[1][2]);
    if (!(t0 > 0 && t1 > 0)) throw DegenerateCounts("bounds need subjects in both arms");
    return {n[0][1] / t0, n[1][1] / t1, n[0][2] / t0, n[1][2] / t1};
}

nlohmann::json IntervalBound::to_json() const {
    nlohmann::json j{{"target", target}, {"lo", lo}, {"hi", hi}, {"point_identified", point_identified}};
    if (!notes.empty()) j["notes"] = notes;
    return j;
}

IntervalBound acece_ratio_bounds(const OutcomeProbabilities& p) {
    check_probability(p.y1_a0, "P(Y=1|A=0)");
    check_probability(p.y1_a1, "P(Y=1|A=1)");
    check_probability(p.y2_a0, "P(Y=2|A=0)");
    check_probability(p.y2_a1, "P(Y=2|A=1)");
    if (!(p.y1_a0 > p.y1_a1))
        throw OutOfRegime("bounds require P(Y=1|A=0) > P(Y=1|A=1); got " + std::to_string(p.y1_a0) +
                          " <= " + std::to_string(p.y1_a1));
    if (!(p.y2_a0 > p.y2_a1))
        throw OutOfRegime("bounds require P(Y=2|A=0) > P(Y=2|A=1); got " + std::to_string(p.y2_a0) +
                          " <= " + std::to_string(p.y2_a1));
    const double ratio = (p.y1_a0 - p.y1_a1) / (p.y2_a0 - p.y2_a1);
    IntervalBound b;
    b.target = "acece_ratio";
    b.point_identified = p.y1_a0 == 1.0 && p.y2_a0 == 1.0;
    b.lo = ratio * p.y2_a0;
    b.hi = b.point_identified ? b.lo : ratio / p.y1_a0;
    return b;
}

IntervalBound ve_ratio_bounds(const OutcomeProbabilities& p, const BaselineRisks& baseline) {
    for (const auto* r : {&baseline.variant1, &baseline.variant2}) {
        if (!((*r)[0] > 0 && (*r)[1] > 0 && std::isfinite((*r)[1])))
            throw DomainError("baseline exposure-conditional risks must be positive");
        if ((*r)[0] > (*r)[1]) throw DomainError("baseline risk interval has min > max");
    }
    IntervalBound b = acece_ratio_bounds(p);
    const double rmin = baseline.variant2[0] / baseline.variant1[1];
    const double rmax = baseline.variant2[1] / baseline.variant1[0];
    b.target = "ve_ratio";
    b.lo *= rmin;
    b.hi *= rmax;
    b.point_identified = b.point_identified && rmin == rmax;
    b.notes.push_back("baseline_source=" + baseline.source);
    b.notes.push_back("baseline_ratio=[" + format_number(rmin) + ", " + format_number(rmax) + "]");
    return b;
}

}  // namespace sievekit
