#include "sievekit/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include "sievekit/errors.hpp"
#include "sievekit/estimands.hpp"
#include "sievekit/format.hpp"
#include "sievekit/rng.hpp"
#include "sievekit/survival.hpp"

namespace sievekit {

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace {

constexpr double kSumTolerance = 1e-9;

void check_unit(double v, const std::string& what) {
    if (!(v >= 0 && v <= 1)) throw DomainError(what + " must lie in [0, 1], got " + std::to_string(v));
}

void check_law(const ExposureLaw& law, const std::string& where) {
    for (int a = 0; a < 2; ++a) {
        double s = 0;
        for (int e = 0; e < 3; ++e) {
            check_unit(law[a][e], where + " P(E=" + std::to_string(e) + "|A=" + std::to_string(a) + ")");
            s += law[a][e];
        }
        if (std::fabs(s - 1) > kSumTolerance)
            throw DomainError(where + " exposure row a=" + std::to_string(a) + " sums to " + std::to_string(s));
    }
}

template <typename Levels>
double total_weight(const Levels& levels, const std::string& what) {
    if (levels.empty()) throw DomainError(what + " needs at least one level");
    double s = 0;
    for (const auto& l : levels) {
        if (!(l.weight > 0 && std::isfinite(l.weight))) throw DomainError(what + " weights must be positive");
        s += l.weight;
    }
    return s;
}

/// Index drawn from unnormalised weights.
template <typename Levels>
std::size_t draw_level(CounterRng& rng, const Levels& levels) {
    double total = 0;
    for (const auto& l : levels) total += l.weight;
    double u = rng.uniform() * total;
    for (std::size_t i = 0; i + 1 < levels.size(); ++i) {
        if (u < levels[i].weight) return i;
        u -= levels[i].weight;
    }
    return levels.size() - 1;
}

int draw_exposure(CounterRng& rng, const std::array<double, 3>& row) {
    const double u = rng.uniform();
    if (u < row[0]) return 0;
    if (u < row[0] + row[1]) return 1;
    return 2;
}

struct LevelParams {
    double beta0;
    std::array<double, 3> beta_e;
    ExposureLaw law;
};

LevelParams level_params(const DgpSpec& spec, const CovariateLevelSpec* level) {
    LevelParams p{spec.beta0, spec.beta_e, spec.exposure_law};
    if (level) {
        if (level->beta0) p.beta0 = *level->beta0;
        if (level->beta_e) p.beta_e = *level->beta_e;
        if (level->exposure_law) p.law = *level->exposure_law;
    }
    return p;
}

double risk(const DgpSpec& spec, const LevelParams& p, int variant, int a) {
    return expit(p.beta0 + p.beta_e[variant]) * expit(spec.beta_ea[variant - 1] * a);
}

const CovariateLevelSpec* find_level(const DgpSpec& spec, const std::string& level) {
    if (level.empty() || !spec.covariate) return nullptr;
    for (const auto& l : spec.covariate->levels)
        if (l.level == level) return &l;
    throw ConfigurationError("scenario has no covariate level '" + level + "'");
}

/// (weight, params, label) per covariate level, or one default entry.
struct WeightedLevel {
    double weight;
    LevelParams params;
    std::string label;
};

std::vector<WeightedLevel> weighted_levels(const DgpSpec& spec) {
    std::vector<WeightedLevel> out;
    if (!spec.covariate) {
        out.push_back({1.0, level_params(spec, nullptr), ""});
        return out;
    }
    const double total = total_weight(spec.covariate->levels, "covariate");
    for (const auto& l : spec.covariate->levels) out.push_back({l.weight / total, level_params(spec, &l), l.level});
    return out;
}

/// Conditional per-interval hazard of cause j in one latent stratum.
double tte_hazard(const TteSpec& t, int cause, int k, int a, double activity, const std::array<double, 2>& zmult) {
    const double alpha = t.alpha[k - 1];
    const double share = cause == 1 ? alpha / (1 + alpha) : 1 / (1 + alpha);
    return t.exposure_prob[k - 1] * activity * share * t.infection[cause - 1] * zmult[cause - 1] *
           std::pow(t.treatment_multiplier[cause - 1], a);
}

nlohmann::json law_json(const ExposureLaw& law) { return {{"a0", law[0]}, {"a1", law[1]}}; }

ExposureLaw law_from_json(const nlohmann::json& j) {
    ExposureLaw law{};
    law[0] = j.at("a0").get<std::array<double, 3>>();
    law[1] = j.at("a1").get<std::array<double, 3>>();
    return law;
}

}  // namespace

// ---------------------------------------------------------------------------
// Spec

void DgpSpec::validate() const {
    check_unit(treatment_prob, "treatment_prob");
    check_law(exposure_law, "scenario");
    for (double b : beta_e)
        if (!std::isfinite(b)) throw DomainError("beta_e must be finite");
    if (!std::isfinite(beta0) || !std::isfinite(beta_ea[0]) || !std::isfinite(beta_ea[1]))
        throw DomainError("outcome coefficients must be finite");
    if (covariate) {
        if (covariate->name.empty()) throw DomainError("covariate needs a name");
        total_weight(covariate->levels, "covariate");
        for (const auto& l : covariate->levels)
            if (l.exposure_law) check_law(*l.exposure_law, "level '" + l.level + "'");
    }
    if (tte) {
        const auto& t = *tte;
        if (t.horizon < 1) throw DomainError("tte horizon must be >= 1");
        if (static_cast<int>(t.exposure_prob.size()) != t.horizon || static_cast<int>(t.alpha.size()) != t.horizon)
            throw DomainError("tte exposure_prob and alpha need one entry per interval");
        check_unit(t.dropout, "dropout");
        total_weight(t.activity, "activity");
        total_weight(t.confounder, "confounder");
        for (double a : t.alpha)
            if (!(a > 0 && std::isfinite(a))) throw DomainError("alpha_k must be positive");
        for (int k = 1; k <= t.horizon; ++k) {
            check_unit(t.exposure_prob[k - 1], "exposure_prob");
            for (const auto& u : t.activity) {
                check_unit(t.exposure_prob[k - 1] * u.value, "exposure probability times activity");
                for (const auto& z : t.confounder)
                    for (int a = 0; a < 2; ++a)
                        for (int j = 1; j <= 2; ++j) {
                            check_unit(t.infection[j - 1] * z.cause_multiplier[j - 1] *
                                           std::pow(t.treatment_multiplier[j - 1], a),
                                       "infection probability given exposure");
                            if (tte_hazard(t, 1, k, a, u.value, z.cause_multiplier) +
                                    tte_hazard(t, 2, k, a, u.value, z.cause_multiplier) > 1)
                                throw DomainError("hazards exceed 1");
                        }
            }
        }
    }
}

void to_json(nlohmann::json& j, const DgpSpec& s) {
    j = nlohmann::json{{"id", s.id},
                       {"beta0", s.beta0},
                       {"beta_e", s.beta_e},
                       {"beta_ea", s.beta_ea},
                       {"exposure_law", law_json(s.exposure_law)},
                       {"treatment_prob", s.treatment_prob}};
    if (s.covariate) {
        nlohmann::json levels = nlohmann::json::array();
        for (const auto& l : s.covariate->levels) {
            nlohmann::json lj{{"level", l.level}, {"weight", l.weight}};
            if (l.beta0) lj["beta0"] = *l.beta0;
            if (l.beta_e) lj["beta_e"] = *l.beta_e;
            if (l.exposure_law) lj["exposure_law"] = law_json(*l.exposure_law);
            levels.push_back(lj);
        }
        j["covariate"] = {{"name", s.covariate->name}, {"levels", levels}};
    }
    if (s.tte) {
        const auto& t = *s.tte;
        nlohmann::json act = nlohmann::json::array(), conf = nlohmann::json::array();
        for (const auto& u : t.activity) act.push_back({{"label", u.label}, {"weight", u.weight}, {"value", u.value}});
        for (const auto& z : t.confounder)
            conf.push_back({{"label", z.label}, {"weight", z.weight}, {"cause_multiplier", z.cause_multiplier}});
        j["tte"] = {{"horizon", t.horizon},         {"dropout", t.dropout},
                    {"exposure_prob", t.exposure_prob}, {"alpha", t.alpha},
                    {"infection", t.infection},     {"treatment_multiplier", t.treatment_multiplier},
                    {"activity", act},              {"confounder", conf}};
    }
}

void from_json(const nlohmann::json& j, DgpSpec& s) {
    try {
        s = DgpSpec{};
        s.id = j.value("id", std::string("custom"));
        s.beta0 = j.at("beta0").get<double>();
        s.beta_e = j.at("beta_e").get<std::array<double, 3>>();
        s.beta_ea = j.at("beta_ea").get<std::array<double, 2>>();
        s.exposure_law = law_from_json(j.at("exposure_law"));
        s.treatment_prob = j.value("treatment_prob", 0.5);
        if (j.contains("covariate")) {
            CovariateMixture m;
            m.name = j["covariate"].at("name").get<std::string>();
            for (const auto& lj : j["covariate"].at("levels")) {
                CovariateLevelSpec l;
                l.level = lj.at("level").get<std::string>();
                l.weight = lj.value("weight", 1.0);
                if (lj.contains("beta0")) l.beta0 = lj["beta0"].get<double>();
                if (lj.contains("beta_e")) l.beta_e = lj["beta_e"].get<std::array<double, 3>>();
                if (lj.contains("exposure_law")) l.exposure_law = law_from_json(lj["exposure_law"]);
                m.levels.push_back(l);
            }
            s.covariate = m;
        }
        if (j.contains("tte")) {
            const auto& tj = j["tte"];
            TteSpec t;
            t.horizon = tj.at("horizon").get<int>();
            t.dropout = tj.value("dropout", 0.0);
            t.exposure_prob = tj.at("exposure_prob").get<std::vector<double>>();
            t.alpha = tj.at("alpha").get<std::vector<double>>();
            t.infection = tj.at("infection").get<std::array<double, 2>>();
            t.treatment_multiplier = tj.at("treatment_multiplier").get<std::array<double, 2>>();
            for (const auto& u : tj.at("activity"))
                t.activity.push_back({u.at("label").get<std::string>(), u.value("weight", 1.0), u.at("value").get<double>()});
            for (const auto& z : tj.at("confounder"))
                t.confounder.push_back({z.at("label").get<std::string>(), z.value("weight", 1.0),
                                        z.at("cause_multiplier").get<std::array<double, 2>>()});
            s.tte = t;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid scenario JSON: ") + e.what());
    }
    s.validate();
}

DgpSpec load_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open scenario file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("scenario file '" + path + "' is not valid JSON: " + e.what());
    }
    return j.get<DgpSpec>();
}

std::vector<std::string> builtin_scenario_ids() {
    return {"d1", "d2_ratio", "d3_noratio", "d4_eet_equal", "d5_eet_unequal", "tte_rare"};
}

DgpSpec builtin_scenario(const std::string& name) {
    // Short names d2..d5 resolve to the full ids.
    std::string id = name;
    for (const auto& full : builtin_scenario_ids())
        if (full.size() > name.size() && full.compare(0, name.size() + 1, name + "_") == 0) id = full;
    DgpSpec s;
    s.id = id;
    s.beta0 = -2;
    s.beta_e = {-1, 2, 1};
    s.beta_ea = {-3, -3};
    s.treatment_prob = 0.5;
    const double third = 1.0 / 3.0;
    if (id == "d1") {
        s.exposure_law = {{{third, third, third}, {third, third, third}}};
    } else if (id == "d2_ratio") {
        s.exposure_law = {{{4.0 / 20, 8.0 / 20, 8.0 / 20}, {10.0 / 20, 5.0 / 20, 5.0 / 20}}};
    } else if (id == "d3_noratio") {
        s.exposure_law = {{{3.0 / 6, 2.0 / 6, 1.0 / 6}, {3.0 / 6, 1.0 / 6, 2.0 / 6}}};
    } else if (id == "d4_eet_equal") {
        s.exposure_law = {{{1.0 / 7, 4.0 / 7, 2.0 / 7}, {1.0 / 5, 2.0 / 5, 2.0 / 5}}};
    } else if (id == "d5_eet_unequal") {
        s.exposure_law = {{{1.0 / 7, 4.0 / 7, 2.0 / 7}, {1.0 / 7, 4.0 / 7, 2.0 / 7}}};
    } else if (id == "tte_rare") {
        s.exposure_law = {{{third, third, third}, {third, third, third}}};
        TteSpec t;
        t.horizon = 12;
        t.dropout = 0.01;
        for (int k = 1; k <= t.horizon; ++k) {
            t.exposure_prob.push_back(0.30 + 0.01 * k);
            t.alpha.push_back(0.8 + (1.25 - 0.8) * (k - 1) / 11.0);
        }
        t.infection = {0.038, 0.038};
        t.treatment_multiplier = {0.6, 0.9};
        t.activity = {{"low", 0.5, 0.8}, {"high", 0.5, 1.0}};
        t.confounder = {{"z1", 0.5, {0.9, 0.9}}, {"z2", 0.5, {1.1, 1.1}}};
        s.tte = t;
    } else {
        throw ConfigurationError("unknown scenario '" + name + "'");
    }
    s.validate();
    return s;
}

// ---------------------------------------------------------------------------
// Oracle

double exposure_conditional_risk(const DgpSpec& spec, int variant, int a, const std::string& level) {
    if (variant != 1 && variant != 2) throw DomainError("variant must be 1 or 2");
    return risk(spec, level_params(spec, find_level(spec, level)), variant, a);
}

std::array<std::array<double, 2>, 2> outcome_probabilities(const DgpSpec& spec) {
    std::array<std::array<double, 2>, 2> p{};
    for (const auto& wl : weighted_levels(spec))
        for (int a = 0; a < 2; ++a)
            for (int j = 1; j <= 2; ++j) p[a][j - 1] += wl.weight * wl.params.law[a][j] * risk(spec, wl.params, j, a);
    return p;
}

OracleValues oracle(const DgpSpec& spec) {
    spec.validate();
    OracleValues o;
    const auto levels = weighted_levels(spec);

    // Exposure-conditional risks averaged over covariate levels.
    std::array<std::array<double, 3>, 2> q{};
    for (const auto& wl : levels)
        for (int a = 0; a < 2; ++a)
            for (int j = 1; j <= 2; ++j) q[a][j] += wl.weight * risk(spec, wl.params, j, a);

    o.true_ccs = (expit(spec.beta_ea[0]) / expit(0.0)) / (expit(spec.beta_ea[1]) / expit(0.0));
    o.true_cce = o.true_ccs;
    for (const auto& wl : levels) {
        const std::string key = wl.label.empty() ? "marginal" : wl.label;
        const double r11 = risk(spec, wl.params, 1, 1), r10 = risk(spec, wl.params, 1, 0);
        const double r21 = risk(spec, wl.params, 2, 1), r20 = risk(spec, wl.params, 2, 0);
        o.true_eie[key] = (r11 / r21) / (r10 / r20);
        o.true_eet[key] = r11 / r21;
    }
    if (spec.covariate) {
        o.true_eie["marginal"] = (q[1][1] / q[1][2]) / (q[0][1] / q[0][2]);
        o.true_eet["marginal"] = q[1][1] / q[1][2];
    }
    o.ir0 = q[0][1] / q[0][2];

    const auto p = outcome_probabilities(spec);
    o.observed_limit_ccs = (p[1][0] / p[0][0]) / (p[1][1] / p[0][1]);
    o.observed_limit_eet = p[1][0] / p[1][1];
    double e1 = 0, e2 = 0;
    for (const auto& wl : levels) {
        e1 += wl.weight * wl.params.law[1][1];
        e2 += wl.weight * wl.params.law[1][2];
    }
    o.treated_exposure_ratio = e1 / e2;
    if (q[1][1] < q[0][1] && q[1][2] < q[0][2]) o.acece_ratio = (q[1][1] - q[0][1]) / (q[1][2] - q[0][2]);

    if (spec.tte) {
        const auto& t = *spec.tte;
        o.alpha_k = t.alpha;
        std::optional<std::array<double, 2>> gamma;
        bool constant = true;
        for (const auto& z : t.confounder) {
            std::array<double, 2> g{};
            for (int a = 0; a < 2; ++a)
                g[a] = (t.infection[0] * z.cause_multiplier[0] * std::pow(t.treatment_multiplier[0], a)) /
                       (t.infection[1] * z.cause_multiplier[1] * std::pow(t.treatment_multiplier[1], a));
            if (!gamma) gamma = g;
            else if (std::fabs((*gamma)[0] - g[0]) > 1e-12 * g[0] || std::fabs((*gamma)[1] - g[1]) > 1e-12 * g[1])
                constant = false;
        }
        if (constant && gamma) {
            o.gamma = gamma;
            o.cse = (*gamma)[1] / (*gamma)[0];
        }

        const int K = t.horizon;
        for (int j = 0; j < 3; ++j) o.marginal_hazard[j].assign(K, {0.0, 0.0});
        o.survival.assign(K, {0.0, 0.0});
        const double wu = total_weight(t.activity, "activity"), wz = total_weight(t.confounder, "confounder");
        for (int a = 0; a < 2; ++a) {
            std::vector<double> surv, weight;
            std::vector<std::pair<const LatentLevel*, const OutcomeConfounderLevel*>> strata;
            for (const auto& u : t.activity)
                for (const auto& z : t.confounder) {
                    strata.emplace_back(&u, &z);
                    surv.push_back(1.0);
                    weight.push_back(u.weight / wu * z.weight / wz);
                }
            for (int k = 1; k <= K; ++k) {
                double mass = 0, m1 = 0, m2 = 0;
                for (std::size_t s = 0; s < strata.size(); ++s) {
                    const double h1 = tte_hazard(t, 1, k, a, strata[s].first->value, strata[s].second->cause_multiplier);
                    const double h2 = tte_hazard(t, 2, k, a, strata[s].first->value, strata[s].second->cause_multiplier);
                    const double w = weight[s] * surv[s];
                    mass += w;
                    m1 += w * h1;
                    m2 += w * h2;
                    surv[s] *= 1 - h1 - h2;
                }
                o.marginal_hazard[1][k - 1][a] = m1 / mass;
                o.marginal_hazard[2][k - 1][a] = m2 / mass;
                o.marginal_hazard[0][k - 1][a] = 1 - (m1 + m2) / mass;
                double total = 0;
                for (std::size_t s = 0; s < strata.size(); ++s) total += weight[s] * surv[s];
                o.survival[k - 1][a] = total;
            }
        }
    }
    return o;
}

nlohmann::json OracleValues::to_json() const {
    nlohmann::json j{{"true_ccs", true_ccs},
                     {"true_cce", true_cce},
                     {"true_eie", true_eie},
                     {"true_eet", true_eet},
                     {"observed_limit_ccs", observed_limit_ccs},
                     {"observed_limit_eet", observed_limit_eet},
                     {"treated_exposure_ratio", treated_exposure_ratio},
                     {"ir0", ir0}};
    j["acece_ratio"] = acece_ratio ? nlohmann::json(*acece_ratio) : nlohmann::json(nullptr);
    if (!alpha_k.empty()) {
        j["alpha_k"] = alpha_k;
        j["gamma"] = gamma ? nlohmann::json(*gamma) : nlohmann::json(nullptr);
        j["cse"] = cse ? nlohmann::json(*cse) : nlohmann::json(nullptr);
    }
    return j;
}

// ---------------------------------------------------------------------------
// Sampling

std::vector<SubjectRecord> sample(const DgpSpec& spec, std::size_t n, std::uint64_t seed, std::size_t lanes) {
    if (n == 0) throw DomainError("sample size must be >= 1");
    spec.validate();
    const auto levels = weighted_levels(spec);
    std::vector<SubjectRecord> out(n);
    parallel_for(n, lanes, [&](std::size_t i) {
        CounterRng rng(seed, i, 0);
        SubjectRecord r;
        r.a = rng.bernoulli(spec.treatment_prob) ? 1 : 0;
        std::size_t li = 0;
        if (spec.covariate) {
            li = draw_level(rng, spec.covariate->levels);
            r.l[spec.covariate->name] = spec.covariate->levels[li].level;
        }
        const auto& p = levels[li].params;
        const int e = draw_exposure(rng, p.law[r.a]);
        r.e = static_cast<Exposure>(e);
        const bool infected = e != 0 && rng.bernoulli(risk(spec, p, e, r.a));
        r.y = infected ? e : 0;
        out[i] = std::move(r);
    });
    return out;
}

std::vector<EventRecord> sample_events(const DgpSpec& spec, std::size_t n, std::uint64_t seed, std::size_t lanes) {
    if (n == 0) throw DomainError("sample size must be >= 1");
    if (!spec.tte) throw ConfigurationError("scenario '" + spec.id + "' has no time-to-event extension");
    spec.validate();
    const auto& t = *spec.tte;
    std::vector<EventRecord> out(n);
    parallel_for(n, lanes, [&](std::size_t i) {
        CounterRng base(seed, i, 0);
        EventRecord r;
        r.a = base.bernoulli(spec.treatment_prob) ? 1 : 0;
        const auto& u = t.activity[draw_level(base, t.activity)];
        const auto& z = t.confounder[draw_level(base, t.confounder)];
        r.l["u"] = u.label;
        r.l["z"] = z.label;
        r.time = t.horizon;
        r.event = 0;
        for (int k = 1; k <= t.horizon; ++k) {
            CounterRng rng(seed, i, static_cast<std::uint64_t>(k));
            if (rng.bernoulli(t.exposure_prob[k - 1] * u.value)) {
                const double alpha = t.alpha[k - 1];
                const int j = rng.bernoulli(alpha / (1 + alpha)) ? 1 : 2;
                const double p = t.infection[j - 1] * z.cause_multiplier[j - 1] * std::pow(t.treatment_multiplier[j - 1], r.a);
                if (rng.bernoulli(p)) {
                    r.time = k;
                    r.event = j;
                    break;
                }
            }
            if (rng.bernoulli(t.dropout)) {
                r.time = k;
                break;
            }
        }
        out[i] = std::move(r);
    });
    return out;
}

double multi_exposure_probability(double r, int m) {
    if (!(r >= 0 && r <= 1)) throw DomainError("prevalence must lie in [0, 1]");
    if (m < 1) throw DomainError("contact count must be >= 1");
    // Upper binomial tail summed term by term; 1 - P(0) - P(1) cancels badly for rare contacts.
    double total = 0;
    for (int k = 2; k <= m; ++k)
        total += std::exp(std::lgamma(m + 1.0) - std::lgamma(k + 1.0) - std::lgamma(m - k + 1.0)) * std::pow(r, k) *
                 std::pow(1 - r, m - k);
    return std::min(1.0, total);
}

// ---------------------------------------------------------------------------
// Convergence study

std::vector<std::string> default_study_estimators(const DgpSpec& spec) {
    if (spec.is_tte()) return {"cse_nonparam", "cse_cox", "ccs_collapsed"};
    return {"ccs_observed", "ccs_exposure"};
}

std::optional<double> estimator_oracle(const DgpSpec& spec, const OracleValues& o, const std::string& estimator) {
    if (estimator == "ccs_observed" || estimator == "cce" || estimator == "eie") return o.observed_limit_ccs;
    if (estimator == "ccs_exposure") return o.true_ccs;
    if (estimator == "eet_equal") return o.observed_limit_eet;
    if (estimator == "eet_measured") return o.true_eet.at("marginal");
    if (estimator == "rr1" || estimator == "rr2") {
        const auto p = outcome_probabilities(spec);
        const int j = estimator == "rr1" ? 0 : 1;
        return p[1][j] / p[0][j];
    }
    if (estimator == "cse_nonparam" || estimator == "cse_cox") return o.cse;
    return std::nullopt;
}

namespace {

double evaluate_time_fixed(const CountTable& t, const std::string& id) {
    if (id == "ccs_observed") return ccs(t).point;
    if (id == "ccs_exposure") return ccs(t, StratumSelector::marginal(), CcsMode::ExposureConditional).point;
    if (id == "cce") return cce(t).point;
    if (id == "eie") return eie(t).point;
    if (id == "eet_equal") return eet(t).point;
    if (id == "eet_measured") return eet(t, StratumSelector::marginal(), EetRoute{std::nullopt, std::nullopt, true}).point;
    if (id == "rr1") return rr(t, 1).point;
    if (id == "rr2") return rr(t, 2).point;
    throw ConfigurationError("unknown time-fixed estimator '" + id + "'");
}

double evaluate_tte(std::span<const EventRecord> events, const std::string& id) {
    if (id == "cse_nonparam") {
        const HazardTable h = discrete_hazards(events);
        return windowed_hazard_ratio(h, {1, h.horizon()}, std::nullopt).point;
    }
    if (id == "cse_cox") return cse_cox(events).point;
    if (id == "ccs_collapsed") return ccs(tabulate(collapse_to_time_fixed(events))).point;
    throw ConfigurationError("unknown time-to-event estimator '" + id + "'");
}

}  // namespace

StudyResult run_convergence_study(const DgpSpec& spec, const std::vector<std::size_t>& n_grid,
                                  std::size_t replications, const std::vector<std::string>& estimators,
                                  std::uint64_t seed, std::size_t lanes) {
    if (n_grid.empty()) throw ConfigurationError("n grid is empty");
    if (replications < 1) throw ConfigurationError("replications must be >= 1");
    if (estimators.empty()) throw ConfigurationError("no estimators requested");
    for (auto n : n_grid)
        if (n == 0) throw ConfigurationError("n grid entries must be >= 1");
    spec.validate();
    // Reject unknown estimator names before any sampling.
    for (const auto& id : estimators) {
        static const std::vector<std::string> fixed{"ccs_observed", "ccs_exposure", "cce",  "eie",
                                                    "eet_equal",    "eet_measured", "rr1", "rr2"};
        static const std::vector<std::string> tte{"cse_nonparam", "cse_cox", "ccs_collapsed"};
        const auto& allowed = spec.is_tte() ? tte : fixed;
        if (std::find(allowed.begin(), allowed.end(), id) == allowed.end())
            throw ConfigurationError("estimator '" + id + "' is not available for scenario '" + spec.id + "'");
    }

    const std::size_t tasks = n_grid.size() * replications;
    const std::size_t m = estimators.size();
    std::vector<StudyRow> rows(tasks * m);
    parallel_for(tasks, lanes, [&](std::size_t task) {
        const std::size_t gi = task / replications, rep = task % replications;
        const std::size_t n = n_grid[gi];
        const std::uint64_t key = derive_key(seed, gi, rep);
        auto record = [&](std::size_t ei, auto&& fn) {
            StudyRow& row = rows[task * m + ei];
            row.n = n;
            row.replication = rep;
            row.estimator = estimators[ei];
            try {
                row.value = fn();
            } catch (const Error& e) {
                row.value = std::nan("");
                row.error = e.kind();
            }
        };
        if (spec.is_tte()) {
            const auto events = sample_events(spec, n, key, 1);
            for (std::size_t ei = 0; ei < m; ++ei) record(ei, [&] { return evaluate_tte(events, estimators[ei]); });
        } else {
            const auto records = sample(spec, n, key, 1);
            const CountTable table = tabulate(records);
            for (std::size_t ei = 0; ei < m; ++ei)
                record(ei, [&] { return evaluate_time_fixed(table, estimators[ei]); });
        }
    });

    StudyResult result;
    result.rows = std::move(rows);
    const OracleValues o = oracle(spec);
    for (std::size_t gi = 0; gi < n_grid.size(); ++gi) {
        for (std::size_t ei = 0; ei < m; ++ei) {
            StudySummary s;
            s.n = n_grid[gi];
            s.estimator = estimators[ei];
            s.oracle = estimator_oracle(spec, o, estimators[ei]);
            double sum = 0, sumsq = 0;
            for (std::size_t rep = 0; rep < replications; ++rep) {
                const StudyRow& row = result.rows[(gi * replications + rep) * m + ei];
                if (std::isnan(row.value)) {
                    ++s.failed;
                    continue;
                }
                ++s.ok;
                sum += row.value;
            }
            s.mean = s.ok ? sum / s.ok : std::nan("");
            for (std::size_t rep = 0; rep < replications; ++rep) {
                const StudyRow& row = result.rows[(gi * replications + rep) * m + ei];
                if (!std::isnan(row.value)) sumsq += (row.value - s.mean) * (row.value - s.mean);
            }
            s.mc_se = s.ok > 1 ? std::sqrt(sumsq / (s.ok - 1) / s.ok) : std::nan("");
            result.summary.push_back(s);
        }
    }
    return result;
}

void StudyResult::write_rows_csv(std::ostream& out) const {
    out << "n,replication,estimator,value,error\n";
    for (const auto& r : rows)
        out << r.n << ',' << r.replication << ',' << r.estimator << ',' << (std::isnan(r.value) ? "" : format_number(r.value))
            << ',' << r.error << '\n';
}

void StudyResult::write_summary_csv(std::ostream& out) const {
    out << "n,estimator,mean,mc_se,ok,failed,oracle\n";
    for (const auto& s : summary)
        out << s.n << ',' << s.estimator << ',' << format_number(s.mean) << ',' << format_number(s.mc_se) << ','
            << s.ok << ',' << s.failed << ',' << (s.oracle ? format_number(*s.oracle) : "") << '\n';
}

nlohmann::json StudyResult::to_json() const {
    nlohmann::json summ = nlohmann::json::array();
    for (const auto& s : summary) {
        nlohmann::json j{{"n", s.n}, {"estimator", s.estimator}, {"ok", s.ok}, {"failed", s.failed}};
        j["mean"] = std::isnan(s.mean) ? nlohmann::json(nullptr) : nlohmann::json(s.mean);
        j["mc_se"] = std::isnan(s.mc_se) ? nlohmann::json(nullptr) : nlohmann::json(s.mc_se);
        j["oracle"] = s.oracle ? nlohmann::json(*s.oracle) : nlohmann::json(nullptr);
        summ.push_back(j);
    }
    return {{"summary", summ}, {"rows", rows.size()}};
}

}  // namespace sievekit
