#include "sievekit/estimands.hpp"

#include <cmath>

#include "sievekit/errors.hpp"
#include "sievekit/format.hpp"

namespace sievekit {

namespace {

using namespace assumption;

std::string cell_name(int a, int y) { return "n[a=" + std::to_string(a) + "][y=" + std::to_string(y) + "]"; }

double arm_total(const OutcomeCounts& n, int a) { return n[a][0] + n[a][1] + n[a][2]; }

void require_arm_totals(const OutcomeCounts& n, const std::string& where) {
    for (int a = 0; a < 2; ++a)
        if (!(arm_total(n, a) > 0)) throw DegenerateCounts(where + ": arm a=" + std::to_string(a) + " is empty");
}

/// Continuity correction on the event cells of a ratio of risk ratios:
/// applied only when one of them is zero.
bool correct_event_cells(OutcomeCounts& n, double c) {
    if (c <= 0) return false;
    const bool zero = n[1][1] == 0 || n[0][1] == 0 || n[1][2] == 0 || n[0][2] == 0;
    if (!zero) return false;
    for (int a = 0; a < 2; ++a) {
        n[a][1] += c;
        n[a][2] += c;
    }
    return true;
}

double ratio_of_ratios(const OutcomeCounts& n, const std::string& where) {
    require_arm_totals(n, where);
    for (auto [a, y] : {std::pair{0, 1}, std::pair{1, 1}, std::pair{0, 2}, std::pair{1, 2}})
        if (!(n[a][y] > 0)) throw DegenerateCounts(where + ": zero count in cell " + cell_name(a, y));
    const double t1 = arm_total(n, 1), t0 = arm_total(n, 0);
    return ((n[1][1] / t1) / (n[0][1] / t0)) / ((n[1][2] / t1) / (n[0][2] / t0));
}

void attach(RatioEstimate& est, const Interval& ci) {
    est.ci_low = ci.lo;
    est.ci_high = ci.hi;
}

void reject_method(CiMethod m, const std::string& estimand) {
    throw ConfigurationError("CI method '" + to_string(m) + "' is not available for " + estimand +
                             (m == CiMethod::Bootstrap ? " on a count table (bootstrap needs records)" : ""));
}

void stamp(RatioEstimate& est, const std::string& name, const StratumSelector& stratum, const EstimatorOptions& o) {
    est.estimand = name;
    est.stratum = stratum.label();
    est.alpha = o.alpha;
    est.method = CiMethod::None;
}

/// Observed-data CCS functional with optional interval; shared by ccs, cce and eie.
RatioEstimate ccs_functional(const CellCounts& cells, const std::string& name, const StratumSelector& stratum,
                             const EstimatorOptions& o) {
    RatioEstimate est;
    stamp(est, name, stratum, o);
    OutcomeCounts n = to_real(cells.unique_exposure_counts());
    if (correct_event_cells(n, o.continuity)) est.notes.push_back("continuity_correction=" + format_number(o.continuity));
    est.point = ratio_of_ratios(n, name + " (" + est.stratum + ")");
    switch (o.ci) {
        case CiMethod::None: break;
        case CiMethod::KatzC:
            attach(est, ccs_ci(n, o.alpha, CcsCiMethod::Sum));
            est.method = CiMethod::KatzC;
            break;
        case CiMethod::Decomposition:
            attach(est, ccs_ci(n, o.alpha, CcsCiMethod::Decomposition));
            est.method = CiMethod::Decomposition;
            break;
        default: reject_method(o.ci, name);
    }
    if (cells.by_exposure) {
        const auto& both = (*cells.by_exposure)[static_cast<int>(Exposure::Both)];
        std::int64_t excluded = 0;
        for (const auto& arm : both)
            for (auto v : arm) excluded += v;
        if (excluded > 0) est.notes.push_back("excluded_exposure_both_rows=" + std::to_string(excluded));
    }
    return est;
}

}  // namespace

const CellCounts& select_stratum(const CountTable& table, const StratumSelector& stratum) {
    if (stratum.is_marginal()) return table.marginal;
    if (table.stratified_by.empty())
        throw ConfigurationError("stratum '" + stratum.label() + "' requested from an unstratified table");
    if (*stratum.covariate != table.stratified_by)
        throw ConfigurationError("table is stratified by '" + table.stratified_by + "', not '" + *stratum.covariate + "'");
    return table.stratum(stratum.level);
}

RatioEstimate rr(const CountTable& counts, int variant, const StratumSelector& stratum, const EstimatorOptions& o,
                 RrInterpretation interpretation) {
    if (variant != 1 && variant != 2) throw DomainError("variant must be 1 or 2");
    const CellCounts& cells = select_stratum(counts, stratum);
    const bool cece = interpretation == RrInterpretation::Cece;
    const std::string name = (cece ? "cece_" : "ate_") + std::to_string(variant);

    RatioEstimate est;
    stamp(est, name, stratum, o);
    est.assumptions = cece ? std::vector<std::string>{unique_exposure, no_effect_on_exposure, randomization,
                                                      exposure_necessity, no_cross_infectivity}
                           : std::vector<std::string>{randomization};

    const OutcomeCounts n = to_real(cece ? cells.unique_exposure_counts() : cells.n);
    RiskCells rc{n[1][variant], arm_total(n, 1), n[0][variant], arm_total(n, 0)};
    const std::string where = name + " (" + est.stratum + ")";
    if (!(rc.n1 > 0) || !(rc.n0 > 0)) throw DegenerateCounts(where + ": empty arm");
    if (o.continuity > 0 && (rc.x1 == 0 || rc.x0 == 0 || rc.x1 == rc.n1 || rc.x0 == rc.n0)) {
        rc = {rc.x1 + o.continuity, rc.n1 + 2 * o.continuity, rc.x0 + o.continuity, rc.n0 + 2 * o.continuity};
        est.notes.push_back("continuity_correction=" + format_number(o.continuity));
    }
    if (!(rc.x0 > 0)) throw DegenerateCounts(where + ": zero count in cell " + cell_name(0, variant));
    if (!(rc.x1 > 0)) throw DegenerateCounts(where + ": zero count in cell " + cell_name(1, variant));
    est.point = (rc.x1 / rc.n1) / (rc.x0 / rc.n0);

    if (o.ci == CiMethod::KatzC) {
        attach(est, katz_ci(est.point, rc, o.alpha));
        est.method = CiMethod::KatzC;
    } else if (o.ci != CiMethod::None) {
        reject_method(o.ci, name);
    }
    return est;
}

RatioEstimate ccs(const CountTable& counts, const StratumSelector& stratum, CcsMode mode, const EstimatorOptions& o) {
    const CellCounts& cells = select_stratum(counts, stratum);
    if (mode == CcsMode::Observed) {
        RatioEstimate est = ccs_functional(cells, "ccs", stratum, o);
        est.assumptions = {unique_exposure, randomization, exposure_necessity, no_cross_infectivity,
                           no_relative_effect_on_exposure_ratios};
        return est;
    }

    if (!cells.has_exposure())
        throw MissingExposure("exposure-conditional CCS requires a measured exposure column 'e'");
    RatioEstimate est;
    stamp(est, "ccs_exposure", stratum, o);
    est.assumptions = {unique_exposure, randomization, exposure_necessity, no_cross_infectivity};
    OutcomeCounts e1 = to_real(cells.exposure_slice(Exposure::Variant1));
    OutcomeCounts e2 = to_real(cells.exposure_slice(Exposure::Variant2));
    const std::string where = "ccs_exposure (" + est.stratum + ")";
    if (o.continuity > 0) {
        bool corrected = false;
        for (auto* slice : {&e1, &e2}) {
            const int j = slice == &e1 ? 1 : 2;
            if ((*slice)[0][j] == 0 || (*slice)[1][j] == 0 || (*slice)[0][0] == 0 || (*slice)[1][0] == 0) {
                for (int a = 0; a < 2; ++a) {
                    (*slice)[a][j] += o.continuity;
                    (*slice)[a][0] += o.continuity;
                }
                corrected = true;
            }
        }
        if (corrected) est.notes.push_back("continuity_correction=" + format_number(o.continuity));
    }
    for (int a = 0; a < 2; ++a) {
        if (!(arm_total(e1, a) > 0)) throw DegenerateCounts(where + ": no subjects with E=1 in arm " + std::to_string(a));
        if (!(arm_total(e2, a) > 0)) throw DegenerateCounts(where + ": no subjects with E=2 in arm " + std::to_string(a));
        if (!(e1[a][1] > 0)) throw DegenerateCounts(where + ": zero count in cell E=1, " + cell_name(a, 1));
        if (!(e2[a][2] > 0)) throw DegenerateCounts(where + ": zero count in cell E=2, " + cell_name(a, 2));
    }
    const double rr1 = (e1[1][1] / arm_total(e1, 1)) / (e1[0][1] / arm_total(e1, 0));
    const double rr2 = (e2[1][2] / arm_total(e2, 1)) / (e2[0][2] / arm_total(e2, 0));
    est.point = rr1 / rr2;
    if (o.ci == CiMethod::KatzC) {
        attach(est, ccs_ci_exposure_conditional(e1, e2, o.alpha));
        est.method = CiMethod::KatzC;
    } else if (o.ci != CiMethod::None) {
        reject_method(o.ci, "ccs_exposure");
    }
    return est;
}

RatioEstimate cce(const CountTable& counts, const StratumSelector& stratum, const EstimatorOptions& o) {
    RatioEstimate est = ccs_functional(select_stratum(counts, stratum), "cce", stratum, o);
    est.assumptions = {unique_exposure, randomization, exposure_necessity};
    return est;
}

RatioEstimate eie(const CountTable& counts, const StratumSelector& stratum, const EstimatorOptions& o) {
    RatioEstimate est = ccs_functional(select_stratum(counts, stratum), "eie", stratum, o);
    est.assumptions = {unique_exposure, exposure_necessity, no_cross_infectivity,
                       conditional_no_relative_effect_on_exposure_ratios, generalised_exposure_randomization};
    if (stratum.is_marginal()) est.assumptions.push_back(general_proportional_potential_outcomes);
    return est;
}

RatioEstimate eet(const CountTable& counts, const StratumSelector& stratum, const EetRoute& route,
                  const EstimatorOptions& o) {
    const int routes = int(route.exposure_ratio.has_value()) + int(route.ir0.has_value()) + int(route.measured);
    if (routes > 1)
        throw ConflictingConfig("EET takes exactly one of: measured exposure, a supplied exposure ratio, or ir0");
    if (route.exposure_ratio && !(*route.exposure_ratio > 0 && std::isfinite(*route.exposure_ratio)))
        throw DomainError("exposure ratio must be a positive finite number");
    if (route.ir0 && !(*route.ir0 > 0 && std::isfinite(*route.ir0)))
        throw DomainError("ir0 must be a positive finite number");

    const CellCounts& cells = select_stratum(counts, stratum);
    const std::vector<std::string> base{unique_exposure, exposure_necessity, no_cross_infectivity};

    if (route.ir0) {
        EstimatorOptions inner = o;
        if (inner.ci == CiMethod::TrinomialF) inner.ci = CiMethod::KatzC;
        RatioEstimate est = ccs_functional(cells, "eet", stratum, inner);
        est.point *= *route.ir0;
        if (est.has_ci()) {
            est.ci_low = *est.ci_low * *route.ir0;
            est.ci_high = *est.ci_high * *route.ir0;
        }
        est.assumptions = base;
        est.assumptions.insert(est.assumptions.end(), {conditional_no_relative_effect_on_exposure_ratios,
                                                       generalised_exposure_randomization,
                                                       infectivity_ratio_untreated_supplied});
        est.notes.push_back("route=ir0");
        est.notes.push_back("ir0=" + format_number(*route.ir0));
        return est;
    }

    RatioEstimate est;
    stamp(est, "eet", stratum, o);
    est.assumptions = base;
    est.assumptions.push_back(exposure_randomization);

    double exposure_ratio = 1.0;
    if (route.measured) {
        if (!cells.has_exposure()) throw MissingExposure("measured-exposure EET route requires exposure column 'e'");
        const auto e1 = cells.exposure_slice(Exposure::Variant1)[1];
        const auto e2 = cells.exposure_slice(Exposure::Variant2)[1];
        const double treated_e1 = static_cast<double>(e1[0] + e1[1] + e1[2]);
        const double treated_e2 = static_cast<double>(e2[0] + e2[1] + e2[2]);
        if (!(treated_e1 > 0 && treated_e2 > 0))
            throw DegenerateCounts("eet (" + est.stratum + "): treated exposure slice E=1 or E=2 is empty");
        exposure_ratio = treated_e1 / treated_e2;
        est.assumptions.push_back(exposure_ratio_measured);
        est.notes.push_back("route=measured");
    } else if (route.exposure_ratio) {
        exposure_ratio = *route.exposure_ratio;
        est.assumptions.push_back(exposure_ratio_supplied);
        est.notes.push_back("route=supplied");
    } else {
        est.assumptions.push_back(equal_treated_exposure);
        est.notes.push_back("route=equal_exposure");
    }
    est.notes.push_back("exposure_ratio=" + format_number(exposure_ratio));
    if (stratum.is_marginal()) est.assumptions.push_back(proportional_potential_outcomes);

    const auto n = cells.unique_exposure_counts();
    double y1 = static_cast<double>(n[1][1]), y2 = static_cast<double>(n[1][2]);
    const std::string where = "eet (" + est.stratum + ")";
    if (o.continuity > 0 && (y1 == 0 || y2 == 0)) {
        y1 += o.continuity;
        y2 += o.continuity;
        est.notes.push_back("continuity_correction=" + format_number(o.continuity));
    }
    if (!(y1 > 0)) throw DegenerateCounts(where + ": zero count in cell " + cell_name(1, 1));
    if (!(y2 > 0)) throw DegenerateCounts(where + ": zero count in cell " + cell_name(1, 2));
    est.point = (y1 / y2) / exposure_ratio;

    if (o.ci == CiMethod::TrinomialF) {
        const Interval ci = eet_trinomial_ci(n[1][1], n[1][2], o.alpha);
        attach(est, {ci.lo / exposure_ratio, ci.hi / exposure_ratio});
        est.method = CiMethod::TrinomialF;
    } else if (o.ci != CiMethod::None) {
        reject_method(o.ci, "eet");
    }
    return est;
}

std::optional<std::string> stratum_heterogeneity_warning(std::span<const RatioEstimate> per_stratum) {
    for (std::size_t i = 0; i < per_stratum.size(); ++i) {
        for (std::size_t k = i + 1; k < per_stratum.size(); ++k) {
            const auto& x = per_stratum[i];
            const auto& y = per_stratum[k];
            if (!x.has_ci() || !y.has_ci()) continue;
            if (*x.ci_high < *y.ci_low || *y.ci_high < *x.ci_low)
                return "stratum-specific " + x.estimand + " intervals for '" + x.stratum + "' and '" + y.stratum +
                       "' do not overlap; a marginal value relies on proportionality across strata";
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------

std::string to_string(Estimand e) {
    switch (e) {
        case Estimand::RrVariant1: return "rr1";
        case Estimand::RrVariant2: return "rr2";
        case Estimand::CcsObserved: return "ccs";
        case Estimand::CcsExposure: return "ccs_exposure";
        case Estimand::Cce: return "cce";
        case Estimand::Eie: return "eie";
        case Estimand::Eet: return "eet";
    }
    return "?";
}

Estimand parse_estimand(const std::string& s, CcsMode mode) {
    if (s == "rr1" || s == "rr") return Estimand::RrVariant1;
    if (s == "rr2") return Estimand::RrVariant2;
    if (s == "ccs") return mode == CcsMode::Observed ? Estimand::CcsObserved : Estimand::CcsExposure;
    if (s == "ccs_exposure" || s == "ccs-exposure") return Estimand::CcsExposure;
    if (s == "cce") return Estimand::Cce;
    if (s == "eie") return Estimand::Eie;
    if (s == "eet") return Estimand::Eet;
    throw ConfigurationError("unknown estimand '" + s + "'");
}

RatioEstimate evaluate(const CountTable& counts, const EstimandSpec& spec) {
    EstimatorOptions o = spec.options;
    o.ci = CiMethod::None;
    switch (spec.estimand) {
        case Estimand::RrVariant1: return rr(counts, 1, spec.stratum, o);
        case Estimand::RrVariant2: return rr(counts, 2, spec.stratum, o);
        case Estimand::CcsObserved: return ccs(counts, spec.stratum, CcsMode::Observed, o);
        case Estimand::CcsExposure: return ccs(counts, spec.stratum, CcsMode::ExposureConditional, o);
        case Estimand::Cce: return cce(counts, spec.stratum, o);
        case Estimand::Eie: return eie(counts, spec.stratum, o);
        case Estimand::Eet: return eet(counts, spec.stratum, spec.eet_route, o);
    }
    throw ConfigurationError("unknown estimand");
}

BootstrapResult bootstrap_ci(std::span<const SubjectRecord> records, const BootstrapPlan& plan,
                             const EstimandSpec& spec, std::size_t lanes) {
    const std::optional<std::string> stratify =
        spec.stratum.is_marginal() ? std::nullopt : std::optional<std::string>(*spec.stratum.covariate);
    // The statistic must be computable on the full sample.
    (void)evaluate(tabulate(records, stratify), spec);
    return bootstrap_ci(
        records.size(), plan,
        [&](std::span<const std::size_t> idx) { return evaluate(tabulate_indexed(records, idx, stratify), spec).point; },
        lanes);
}

}  // namespace sievekit
