#include "sievekit/ratio_estimate.hpp"

#include "sievekit/errors.hpp"

namespace sievekit {

std::string to_string(CiMethod m) {
    switch (m) {
        case CiMethod::None: return "none";
        case CiMethod::KatzC: return "katz_c";
        case CiMethod::Decomposition: return "decomposition";
        case CiMethod::TrinomialF: return "trinomial_f";
        case CiMethod::Bootstrap: return "bootstrap";
    }
    return "none";
}

CiMethod parse_ci_method(std::string_view s) {
    if (s == "none") return CiMethod::None;
    if (s == "katz-c" || s == "katz_c") return CiMethod::KatzC;
    if (s == "decomposition") return CiMethod::Decomposition;
    if (s == "trinomial-f" || s == "trinomial_f") return CiMethod::TrinomialF;
    if (s == "bootstrap") return CiMethod::Bootstrap;
    throw ConfigurationError("unknown CI method '" + std::string(s) + "'");
}

nlohmann::json RatioEstimate::to_json() const {
    nlohmann::json j{{"estimand", estimand}, {"stratum", stratum}, {"point", point}};
    if (has_ci()) j["ci"] = {*ci_low, *ci_high};
    else j["ci"] = nullptr;
    j["alpha"] = alpha;
    j["method"] = to_string(method);
    j["assumptions"] = assumptions;
    if (!notes.empty()) j["notes"] = notes;
    return j;
}

}  // namespace sievekit
