#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sievekit/ratio_estimate.hpp"
#include "sievekit/trial_data.hpp"
#include "sievekit/uncertainty.hpp"

namespace sievekit {

/// Per-interval cause-specific hazards by arm. Interval indices are 1-based;
/// cause 0 addresses the survival factor h0 = 1 - h1 - h2.
class HazardTable {
public:
    HazardTable() = default;

    /// Build from explicit hazards h[j-1][k-1][a] for causes 1 and 2. Risk
    /// sets and event counts are left at zero. Throws DomainError when a
    /// hazard is outside [0,1] or h1 + h2 > 1.
    static HazardTable from_hazards(const std::vector<std::array<double, 2>>& cause1,
                                    const std::vector<std::array<double, 2>>& cause2);

    int horizon() const { return static_cast<int>(h_[1].size()); }
    double hazard(int cause, int k, int a) const;
    double survival_factor(int k, int a) const { return hazard(0, k, a); }
    std::int64_t at_risk(int k, int a) const;
    std::int64_t events(int cause, int k, int a) const;
    /// Whether counts back the hazards (false for from_hazards tables).
    bool has_counts() const { return has_counts_; }

    friend HazardTable discrete_hazards(std::span<const EventRecord> events, std::optional<int> horizon);

private:
    std::array<std::vector<std::array<double, 2>>, 3> h_;
    std::vector<std::array<std::int64_t, 2>> at_risk_;
    std::array<std::vector<std::array<std::int64_t, 2>>, 3> events_;  ///< [0] counts censorings
    bool has_counts_ = false;

    void check_index(int k, int a) const;
};

/// Hazards from event records. Subjects censored in interval k remain at risk
/// in k and leave afterwards. `horizon` defaults to the largest observed time.
/// Throws RiskSetExhausted when an arm has nobody at risk at k = 1.
HazardTable discrete_hazards(std::span<const EventRecord> events, std::optional<int> horizon = {});

/// Cumulative incidence per cause and overall survival, both 1-based in k.
struct IncidenceTable {
    std::array<std::vector<std::array<double, 2>>, 3> mu;  ///< mu[j][k-1][a], j = 1, 2 ([0] unused)
    std::vector<std::array<double, 2>> survival;           ///< product of h0 up to k

    int horizon() const { return static_cast<int>(survival.size()); }
    double incidence(int cause, int k, int a) const;
    double survival_at(int k, int a) const;
};

IncidenceTable cumulative_incidence(const HazardTable& h);

/// Ratio of arm-wise cumulative incidence ratios at k.
RatioEstimate cce_k(const IncidenceTable& incidence, int k);

/// Ratio of arm-wise hazard ratios at k. When the table carries counts, a
/// log-normal interval is attached from the multinomial delta variance.
RatioEstimate cse_k_nonparametric(const HazardTable& h, int k, std::optional<double> alpha = 0.05);

// ---------------------------------------------------------------------------
// Nelson-Aalen

struct Window {
    int first = 1;
    int last = 1;

    std::string label() const { return std::to_string(first) + ":" + std::to_string(last); }
};

Window parse_window(const std::string& text);
std::vector<Window> parse_windows(const std::string& text);

/// Windowed cumulative hazard sum_k d_jk / R_k per arm with its binomial
/// variance sum_k d (R - d) / R^3.
struct CumulativeHazard {
    std::array<double, 2> value{};
    std::array<double, 2> variance{};
};

CumulativeHazard nelson_aalen(const HazardTable& h, int cause, Window window);
CumulativeHazard nelson_aalen(std::span<const EventRecord> events, int cause, Window window);

/// [L1(1)/L1(0)] / [L2(1)/L2(0)] over the window with a delta-method
/// log-normal interval (within-arm cause covariance included). For a
/// single-interval window this equals cse_k_nonparametric.
RatioEstimate windowed_hazard_ratio(const HazardTable& h, Window window, std::optional<double> alpha = 0.05);

// ---------------------------------------------------------------------------
// Cox

struct CoxFit {
    double beta = 0;
    double se = 0;
    int cause = 1;
    int iterations = 0;
    bool converged = false;
    double loglik = 0;
};

struct CoxOptions {
    double tolerance = 1e-10;
    int max_iterations = 50;
};

/// Breslow log partial likelihood of the treatment coefficient for one cause.
/// Competing-cause events leave the risk set at the start of their interval;
/// censored subjects stay at risk through their censoring interval.
double cox_log_partial_likelihood(std::span<const EventRecord> events, int cause, double beta);

/// Newton-Raphson with step halving. Throws SeparationError when the
/// likelihood is monotone and CoxNoConverge when the iteration limit is hit.
CoxFit cox_fit(std::span<const EventRecord> events, int cause, const CoxOptions& options = {});

/// exp(beta1 - beta2) from two cause-specific fits; percentile bootstrap
/// interval over subjects when a plan is given.
RatioEstimate cse_cox(std::span<const EventRecord> events, const std::optional<BootstrapPlan>& plan = {},
                      std::size_t lanes = default_lanes());

/// Multi-covariate Breslow fit with design rows aligned to `events`.
struct CoxModel {
    Eigen::VectorXd beta;
    Eigen::MatrixXd covariance;
    int cause = 1;
    int iterations = 0;
    bool converged = false;
    double loglik = 0;
};

CoxModel cox_fit_multi(std::span<const EventRecord> events, int cause, const Eigen::MatrixXd& design,
                       const CoxOptions& options = {});

/// Assumption ledger attached to time-to-event CSE estimates.
std::vector<std::string> tte_cse_assumptions();

}  // namespace sievekit
