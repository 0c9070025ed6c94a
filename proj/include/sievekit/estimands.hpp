#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sievekit/ratio_estimate.hpp"
#include "sievekit/trial_data.hpp"
#include "sievekit/uncertainty.hpp"

namespace sievekit {

/// Marginal table or one level of the table's stratifying covariate.
struct StratumSelector {
    std::optional<std::string> covariate;
    std::string level;

    static StratumSelector marginal() { return {}; }
    static StratumSelector of(std::string covariate, std::string level) { return {std::move(covariate), std::move(level)}; }

    bool is_marginal() const { return !covariate.has_value(); }
    std::string label() const { return covariate ? *covariate + "=" + level : "marginal"; }
};

/// Resolve the selector against a table; throws ConfigurationError when the
/// covariate or level does not exist.
const CellCounts& select_stratum(const CountTable& table, const StratumSelector& stratum);

struct EstimatorOptions {
    /// Added to the four outcome cells of a ratio that would otherwise have a
    /// zero cell. 0 disables the correction (zero cells raise DegenerateCounts).
    double continuity = 0.0;
    CiMethod ci = CiMethod::None;
    double alpha = 0.05;
};

enum class RrInterpretation { Cece, AverageTreatmentEffect };
enum class CcsMode { Observed, ExposureConditional };

/// P(Y=j|A=1) / P(Y=j|A=0).
RatioEstimate rr(const CountTable& counts, int variant, const StratumSelector& stratum = StratumSelector::marginal(),
                 const EstimatorOptions& options = {}, RrInterpretation interpretation = RrInterpretation::Cece);

/// Ratio of the variant-specific risk ratios; in exposure-conditional mode the
/// ratios are taken within E=1 and E=2 respectively.
RatioEstimate ccs(const CountTable& counts, const StratumSelector& stratum = StratumSelector::marginal(),
                  CcsMode mode = CcsMode::Observed, const EstimatorOptions& options = {});

/// Same functional as observed-mode ccs, with the weaker assumption set.
RatioEstimate cce(const CountTable& counts, const StratumSelector& stratum = StratumSelector::marginal(),
                  const EstimatorOptions& options = {});

RatioEstimate eie(const CountTable& counts, const StratumSelector& stratum = StratumSelector::marginal(),
                  const EstimatorOptions& options = {});

/// How the unidentified treated exposure ratio P(E=1|A=1)/P(E=2|A=1) is obtained.
struct EetRoute {
    std::optional<double> exposure_ratio;  ///< supplied externally
    std::optional<double> ir0;             ///< infectivity ratio of the untreated; EET = EIE * ir0
    bool measured = false;                 ///< compute the ratio from measured exposure
};

/// Defaults to the equal-exposure route (ratio 1) when no route is given.
/// Throws ConflictingConfig when more than one route is requested.
RatioEstimate eet(const CountTable& counts, const StratumSelector& stratum = StratumSelector::marginal(),
                  const EetRoute& route = {}, const EstimatorOptions& options = {});

/// One estimate per level of the table's stratifying covariate.
template <typename Fn>
std::vector<RatioEstimate> per_stratum(const CountTable& counts, Fn&& estimator) {
    std::vector<RatioEstimate> out;
    for (const auto& level : counts.levels())
        out.push_back(estimator(StratumSelector::of(counts.stratified_by, level)));
    return out;
}

/// Warning text when per-stratum intervals are pairwise disjoint somewhere,
/// i.e. a marginal EIE/EET would average over heterogeneous strata.
std::optional<std::string> stratum_heterogeneity_warning(std::span<const RatioEstimate> per_stratum);

// ---------------------------------------------------------------------------
// Resampling

enum class Estimand { RrVariant1, RrVariant2, CcsObserved, CcsExposure, Cce, Eie, Eet };

std::string to_string(Estimand e);
Estimand parse_estimand(const std::string& s, CcsMode mode = CcsMode::Observed);

struct EstimandSpec {
    Estimand estimand = Estimand::CcsObserved;
    StratumSelector stratum;
    EetRoute eet_route;
    EstimatorOptions options;  ///< ci field ignored
};

/// Point estimate of `spec` on an already tabulated table.
RatioEstimate evaluate(const CountTable& counts, const EstimandSpec& spec);

/// Percentile bootstrap over subjects for any time-fixed estimand.
BootstrapResult bootstrap_ci(std::span<const SubjectRecord> records, const BootstrapPlan& plan,
                             const EstimandSpec& spec, std::size_t lanes = default_lanes());

}  // namespace sievekit
