#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace sievekit {

enum class CiMethod { None, KatzC, Decomposition, TrinomialF, Bootstrap };

std::string to_string(CiMethod m);
CiMethod parse_ci_method(std::string_view s);

/// Identification assumptions referenced by estimate ledgers.
namespace assumption {
inline constexpr const char* unique_exposure = "unique_exposure";
inline constexpr const char* no_effect_on_exposure = "no_effect_on_exposure";
inline constexpr const char* randomization = "randomization";
inline constexpr const char* exposure_necessity = "exposure_necessity";
inline constexpr const char* no_cross_infectivity = "no_cross_infectivity";
inline constexpr const char* no_relative_effect_on_exposure_ratios = "no_relative_effect_on_exposure_ratios";
inline constexpr const char* conditional_no_relative_effect_on_exposure_ratios =
    "conditional_no_relative_effect_on_exposure_ratios";
inline constexpr const char* exposure_randomization = "exposure_randomization";
inline constexpr const char* generalised_exposure_randomization = "generalised_exposure_randomization";
inline constexpr const char* equal_treated_exposure = "equal_treated_exposure";
inline constexpr const char* proportional_potential_outcomes = "proportional_potential_outcomes";
inline constexpr const char* general_proportional_potential_outcomes = "general_proportional_potential_outcomes";
inline constexpr const char* exposure_ratio_supplied = "exposure_ratio_supplied";
inline constexpr const char* exposure_ratio_measured = "exposure_ratio_measured";
inline constexpr const char* infectivity_ratio_untreated_supplied = "infectivity_ratio_untreated_supplied";
// time-to-event
inline constexpr const char* tte_randomization = "tte_randomization";
inline constexpr const char* tte_exposure_necessity = "tte_exposure_necessity";
inline constexpr const char* tte_no_cross_infectivity = "tte_no_cross_infectivity";
inline constexpr const char* exposure_ratio_of_exposed = "exposure_ratio_of_exposed";
inline constexpr const char* scaled_new_infection = "scaled_new_infection";
inline constexpr const char* independent_censoring = "independent_censoring";
inline constexpr const char* proportional_hazards = "proportional_hazards";
}  // namespace assumption

/// Point estimate of a ratio-type estimand with optional interval and the
/// assumptions its interpretation rests on.
struct RatioEstimate {
    std::string estimand;
    std::string stratum = "marginal";
    double point = 0;
    std::optional<double> ci_low;
    std::optional<double> ci_high;
    double alpha = 0.05;
    CiMethod method = CiMethod::None;
    std::vector<std::string> assumptions;
    std::vector<std::string> notes;

    bool has_ci() const { return ci_low.has_value() && ci_high.has_value(); }
    bool contains(double v) const { return has_ci() && *ci_low <= v && v <= *ci_high; }
    nlohmann::json to_json() const;
};

}  // namespace sievekit
