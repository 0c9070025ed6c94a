#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sievekit/parallel.hpp"
#include "sievekit/trial_data.hpp"

namespace sievekit {

/// P(E=e | A=a), indexed [a][e] with e in {0, 1, 2}.
using ExposureLaw = std::array<std::array<double, 3>, 2>;

double expit(double x);

/// One level of a categorical baseline covariate; unset fields inherit the
/// scenario-wide values.
struct CovariateLevelSpec {
    std::string level;
    double weight = 1;
    std::optional<double> beta0;
    std::optional<std::array<double, 3>> beta_e;
    std::optional<ExposureLaw> exposure_law;
};

struct CovariateMixture {
    std::string name;
    std::vector<CovariateLevelSpec> levels;
};

struct LatentLevel {
    std::string label;
    double weight = 1;
    double value = 1;  ///< multiplies the per-interval exposure probability
};

struct OutcomeConfounderLevel {
    std::string label;
    double weight = 1;
    std::array<double, 2> cause_multiplier{1, 1};  ///< scales infection by variant 1 and 2
};

/// Discrete-time extension. In interval k a subject at risk with activity u is
/// exposed with probability exposure_prob[k] * u; the exposing variant is 1
/// with odds alpha[k]; infection given exposure to j has probability
/// infection[j] * z_j * treatment_multiplier[j]^a. Survivors then drop out
/// with probability dropout.
struct TteSpec {
    int horizon = 12;
    double dropout = 0.01;
    std::vector<double> exposure_prob;
    std::vector<double> alpha;
    std::array<double, 2> infection{};
    std::array<double, 2> treatment_multiplier{1, 1};
    std::vector<LatentLevel> activity;
    std::vector<OutcomeConfounderLevel> confounder;
};

/// Outcome model: P(Y=j | E=j, A=a) = expit(beta0 + beta_e[j]) * expit(beta_ea[j-1] * a).
struct DgpSpec {
    std::string id = "custom";
    double beta0 = 0;
    std::array<double, 3> beta_e{};  ///< per exposure level; beta_e[0] has no effect
    std::array<double, 2> beta_ea{};
    ExposureLaw exposure_law{};
    double treatment_prob = 0.5;
    std::optional<CovariateMixture> covariate;
    std::optional<TteSpec> tte;

    bool is_tte() const { return tte.has_value(); }
    /// Throws DomainError on any invalid probability or shape.
    void validate() const;
};

void to_json(nlohmann::json& j, const DgpSpec& spec);
void from_json(const nlohmann::json& j, DgpSpec& spec);
DgpSpec load_spec(const std::string& path);

std::vector<std::string> builtin_scenario_ids();
/// d1, d2_ratio, d3_noratio, d4_eet_equal, d5_eet_unequal or tte_rare.
DgpSpec builtin_scenario(const std::string& id);

/// Exposure-conditional risk P(Y=j | E=j, A=a) for one covariate level (or the
/// scenario defaults when `level` is empty).
double exposure_conditional_risk(const DgpSpec& spec, int variant, int a, const std::string& level = {});

/// Marginal P(Y=j | A=a) for j in {1, 2}, indexed [a][j-1].
std::array<std::array<double, 2>, 2> outcome_probabilities(const DgpSpec& spec);

struct OracleValues {
    double true_ccs = 0;
    double true_cce = 0;
    std::map<std::string, double> true_eie;  ///< "marginal" and per covariate level
    std::map<std::string, double> true_eet;
    double observed_limit_ccs = 0;
    double observed_limit_eet = 0;
    double treated_exposure_ratio = 0;
    std::optional<double> acece_ratio;  ///< set in the protective regime
    double ir0 = 0;

    // Time-to-event extension.
    std::optional<std::array<double, 2>> gamma;  ///< gamma[a]; unset when not constant over latent levels
    std::vector<double> alpha_k;
    std::optional<double> cse;
    std::array<std::vector<std::array<double, 2>>, 3> marginal_hazard;  ///< [j][k-1][a]
    std::vector<std::array<double, 2>> survival;                       ///< all-cause, dropout excluded

    nlohmann::json to_json() const;
};

OracleValues oracle(const DgpSpec& spec);

/// Deterministic iid sample; subject i draws from a stream keyed by (seed, i)
/// so the output does not depend on `lanes`. Throws DomainError for n = 0.
std::vector<SubjectRecord> sample(const DgpSpec& spec, std::size_t n, std::uint64_t seed,
                                  std::size_t lanes = default_lanes());
std::vector<EventRecord> sample_events(const DgpSpec& spec, std::size_t n, std::uint64_t seed,
                                       std::size_t lanes = default_lanes());

/// P(more than one infectious contact) among m contacts with prevalence r.
double multi_exposure_probability(double r, int m);

// ---------------------------------------------------------------------------
// Convergence study

struct StudyRow {
    std::size_t n = 0;
    std::size_t replication = 0;
    std::string estimator;
    double value = 0;   ///< NaN when the estimator failed
    std::string error;  ///< error kind on failure
};

struct StudySummary {
    std::size_t n = 0;
    std::string estimator;
    double mean = 0;
    double mc_se = 0;
    std::size_t ok = 0;
    std::size_t failed = 0;
    std::optional<double> oracle;
};

struct StudyResult {
    std::vector<StudyRow> rows;
    std::vector<StudySummary> summary;

    void write_rows_csv(std::ostream& out) const;
    void write_summary_csv(std::ostream& out) const;
    nlohmann::json to_json() const;
};

/// Estimator ids: ccs_observed, ccs_exposure, cce, eie, eet_equal,
/// eet_measured, rr1, rr2 (time-fixed) and cse_nonparam, cse_cox,
/// ccs_collapsed (time-to-event).
std::vector<std::string> default_study_estimators(const DgpSpec& spec);

/// Oracle limit of an estimator on a scenario, when defined.
std::optional<double> estimator_oracle(const DgpSpec& spec, const OracleValues& o, const std::string& estimator);

StudyResult run_convergence_study(const DgpSpec& spec, const std::vector<std::size_t>& n_grid,
                                  std::size_t replications, const std::vector<std::string>& estimators,
                                  std::uint64_t seed, std::size_t lanes = default_lanes());

}  // namespace sievekit
