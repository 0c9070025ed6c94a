#include "sievekit/survival.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

#include "sievekit/errors.hpp"
#include "sievekit/format.hpp"

namespace sievekit {

namespace {

void check_cause(int cause, bool allow_zero) {
    if (cause < (allow_zero ? 0 : 1) || cause > 2) throw DomainError("cause must be 1 or 2, got " + std::to_string(cause));
}

void check_window(const Window& w, int horizon) {
    if (w.first < 1 || w.last < w.first || w.last > horizon)
        throw DomainError("window " + w.label() + " is not within 1:" + std::to_string(horizon));
}

int parse_int(std::string_view s, const std::string& context) {
    int v = 0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) throw ConfigurationError("cannot parse '" + std::string(s) + "' in " + context);
    return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// HazardTable

void HazardTable::check_index(int k, int a) const {
    if (k < 1 || k > horizon()) throw DomainError("interval " + std::to_string(k) + " outside 1:" + std::to_string(horizon()));
    if (a != 0 && a != 1) throw DomainError("arm must be 0 or 1");
}

double HazardTable::hazard(int cause, int k, int a) const {
    check_cause(cause, true);
    check_index(k, a);
    return h_[cause][k - 1][a];
}

std::int64_t HazardTable::at_risk(int k, int a) const {
    check_index(k, a);
    return has_counts_ ? at_risk_[k - 1][a] : 0;
}

std::int64_t HazardTable::events(int cause, int k, int a) const {
    check_cause(cause, true);
    check_index(k, a);
    return has_counts_ ? events_[cause][k - 1][a] : 0;
}

HazardTable HazardTable::from_hazards(const std::vector<std::array<double, 2>>& cause1,
                                      const std::vector<std::array<double, 2>>& cause2) {
    if (cause1.size() != cause2.size() || cause1.empty())
        throw DomainError("hazard vectors must be nonempty and of equal length");
    HazardTable t;
    t.h_[1] = cause1;
    t.h_[2] = cause2;
    t.h_[0].resize(cause1.size());
    for (std::size_t k = 0; k < cause1.size(); ++k) {
        for (int a = 0; a < 2; ++a) {
            const double h1 = cause1[k][a], h2 = cause2[k][a];
            if (!(h1 >= 0 && h1 <= 1 && h2 >= 0 && h2 <= 1 && h1 + h2 <= 1))
                throw DomainError("invalid hazards at k=" + std::to_string(k + 1) + ", a=" + std::to_string(a));
            t.h_[0][k][a] = 1.0 - h1 - h2;
        }
    }
    return t;
}

HazardTable discrete_hazards(std::span<const EventRecord> events, std::optional<int> horizon) {
    int max_time = 0;
    for (const auto& e : events) {
        if (e.a != 0 && e.a != 1) throw DomainError("arm must be 0 or 1 (line " + std::to_string(e.line) + ")");
        if (e.time < 1) throw DomainError("time must be >= 1 (line " + std::to_string(e.line) + ")");
        if (e.event < 0 || e.event > 2) throw DomainError("event must be 0, 1 or 2 (line " + std::to_string(e.line) + ")");
        max_time = std::max(max_time, e.time);
    }
    const int K = horizon.value_or(max_time);
    if (K < 1) throw RiskSetExhausted("no follow-up: horizon is empty");

    HazardTable t;
    t.has_counts_ = true;
    for (auto& v : t.events_) v.assign(K, {0, 0});
    std::vector<std::array<std::int64_t, 2>> exits(K + 1, {0, 0});  // exits at interval k (index k-1), beyond K at K
    for (const auto& e : events) {
        const int k = std::min(e.time, K + 1);
        exits[k - 1][e.a] += 1;
        if (e.time <= K) t.events_[e.event][e.time - 1][e.a] += 1;
    }
    t.at_risk_.assign(K, {0, 0});
    std::array<std::int64_t, 2> remaining{0, 0};
    for (int k = K; k >= 0; --k) {
        for (int a = 0; a < 2; ++a) remaining[a] += exits[k][a];
        if (k < K) t.at_risk_[k] = remaining;
    }
    for (int a = 0; a < 2; ++a)
        if (t.at_risk_[0][a] == 0) throw RiskSetExhausted("arm a=" + std::to_string(a) + " has nobody at risk at k=1");

    for (auto& v : t.h_) v.assign(K, {0.0, 0.0});
    for (int k = 0; k < K; ++k) {
        for (int a = 0; a < 2; ++a) {
            const double r = static_cast<double>(t.at_risk_[k][a]);
            if (r == 0) {
                t.h_[0][k][a] = 1.0;
                continue;
            }
            const double h1 = t.events_[1][k][a] / r, h2 = t.events_[2][k][a] / r;
            t.h_[1][k][a] = h1;
            t.h_[2][k][a] = h2;
            t.h_[0][k][a] = 1.0 - h1 - h2;
        }
    }
    return t;
}

// ---------------------------------------------------------------------------
// Cumulative incidence

double IncidenceTable::incidence(int cause, int k, int a) const {
    check_cause(cause, false);
    if (k < 1 || k > horizon() || (a != 0 && a != 1)) throw DomainError("index outside incidence table");
    return mu[cause][k - 1][a];
}

double IncidenceTable::survival_at(int k, int a) const {
    if (k < 1 || k > horizon() || (a != 0 && a != 1)) throw DomainError("index outside incidence table");
    return survival[k - 1][a];
}

IncidenceTable cumulative_incidence(const HazardTable& h) {
    const int K = h.horizon();
    IncidenceTable out;
    for (auto& v : out.mu) v.assign(K, {0.0, 0.0});
    out.survival.assign(K, {0.0, 0.0});
    for (int a = 0; a < 2; ++a) {
        double surv = 1.0, m1 = 0.0, m2 = 0.0;
        for (int k = 1; k <= K; ++k) {
            m1 += h.hazard(1, k, a) * surv;
            m2 += h.hazard(2, k, a) * surv;
            surv *= h.survival_factor(k, a);
            out.mu[1][k - 1][a] = m1;
            out.mu[2][k - 1][a] = m2;
            out.survival[k - 1][a] = surv;
        }
    }
    return out;
}

RatioEstimate cce_k(const IncidenceTable& inc, int k) {
    const double m11 = inc.incidence(1, k, 1), m10 = inc.incidence(1, k, 0);
    const double m21 = inc.incidence(2, k, 1), m20 = inc.incidence(2, k, 0);
    const std::string at = " at k=" + std::to_string(k);
    if (!(m10 > 0)) throw DegenerateIncidence("mu1(a=0) is zero" + at);
    if (!(m11 > 0)) throw DegenerateIncidence("mu1(a=1) is zero" + at);
    if (!(m20 > 0)) throw DegenerateIncidence("mu2(a=0) is zero" + at);
    if (!(m21 > 0)) throw DegenerateIncidence("mu2(a=1) is zero" + at);
    RatioEstimate est;
    est.estimand = "cce_k";
    est.stratum = "k=" + std::to_string(k);
    est.point = (m11 / m10) / (m21 / m20);
    est.assumptions = {assumption::tte_randomization, assumption::tte_exposure_necessity,
                       assumption::independent_censoring};
    return est;
}

RatioEstimate cse_k_nonparametric(const HazardTable& h, int k, std::optional<double> alpha) {
    const double h11 = h.hazard(1, k, 1), h10 = h.hazard(1, k, 0);
    const double h21 = h.hazard(2, k, 1), h20 = h.hazard(2, k, 0);
    const std::string at = " at k=" + std::to_string(k);
    if (!(h10 > 0)) throw DegenerateCounts("cause-1 hazard in arm a=0 is zero" + at);
    if (!(h11 > 0)) throw DegenerateCounts("cause-1 hazard in arm a=1 is zero" + at);
    if (!(h20 > 0)) throw DegenerateCounts("cause-2 hazard in arm a=0 is zero" + at);
    if (!(h21 > 0)) throw DegenerateCounts("cause-2 hazard in arm a=1 is zero" + at);
    RatioEstimate est;
    est.estimand = "cse_k";
    est.stratum = "k=" + std::to_string(k);
    est.point = (h11 / h10) / (h21 / h20);
    est.assumptions = tte_cse_assumptions();
    if (alpha && h.has_counts()) {
        double var = 0;
        for (int a = 0; a < 2; ++a) var += 1.0 / h.events(1, k, a) + 1.0 / h.events(2, k, a);
        const Interval ci = log_normal_interval(est.point, {var}, *alpha);
        est.ci_low = ci.lo;
        est.ci_high = ci.hi;
        est.alpha = *alpha;
        est.method = CiMethod::KatzC;
    }
    return est;
}

// ---------------------------------------------------------------------------
// Nelson-Aalen

Window parse_window(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) {
        const int k = parse_int(text, "window");
        return {k, k};
    }
    return {parse_int(std::string_view(text).substr(0, colon), "window"),
            parse_int(std::string_view(text).substr(colon + 1), "window")};
}

std::vector<Window> parse_windows(const std::string& text) {
    std::vector<Window> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const std::string part = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!part.empty()) out.push_back(parse_window(part));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (out.empty()) throw ConfigurationError("no windows given");
    return out;
}

CumulativeHazard nelson_aalen(const HazardTable& h, int cause, Window window) {
    check_cause(cause, false);
    check_window(window, h.horizon());
    if (!h.has_counts()) throw DomainError("Nelson-Aalen needs a count-backed hazard table");
    CumulativeHazard out;
    for (int a = 0; a < 2; ++a) {
        for (int k = window.first; k <= window.last; ++k) {
            const double r = static_cast<double>(h.at_risk(k, a));
            if (r == 0)
                throw RiskSetExhausted("empty risk set at k=" + std::to_string(k) + " in arm a=" + std::to_string(a));
            const double d = static_cast<double>(h.events(cause, k, a));
            out.value[a] += d / r;
            out.variance[a] += d * (r - d) / (r * r * r);
        }
    }
    return out;
}

CumulativeHazard nelson_aalen(std::span<const EventRecord> events, int cause, Window window) {
    return nelson_aalen(discrete_hazards(events), cause, window);
}

RatioEstimate windowed_hazard_ratio(const HazardTable& h, Window window, std::optional<double> alpha) {
    const CumulativeHazard c1 = nelson_aalen(h, 1, window);
    const CumulativeHazard c2 = nelson_aalen(h, 2, window);
    const std::string where = " in window " + window.label();
    for (int a = 0; a < 2; ++a) {
        if (!(c1.value[a] > 0)) throw DegenerateCounts("no cause-1 events in arm a=" + std::to_string(a) + where);
        if (!(c2.value[a] > 0)) throw DegenerateCounts("no cause-2 events in arm a=" + std::to_string(a) + where);
    }
    RatioEstimate est;
    est.estimand = "cumulative_hazard_ratio";
    est.stratum = "window=" + window.label();
    est.point = (c1.value[1] / c1.value[0]) / (c2.value[1] / c2.value[0]);
    est.assumptions = tte_cse_assumptions();
    if (alpha) {
        double var = 0;
        for (int a = 0; a < 2; ++a) {
            double cross = 0;
            for (int k = window.first; k <= window.last; ++k) {
                const double r = static_cast<double>(h.at_risk(k, a));
                cross += static_cast<double>(h.events(1, k, a)) * static_cast<double>(h.events(2, k, a)) / (r * r * r);
            }
            var += c1.variance[a] / (c1.value[a] * c1.value[a]) + c2.variance[a] / (c2.value[a] * c2.value[a]) +
                   2 * cross / (c1.value[a] * c2.value[a]);
        }
        const Interval ci = log_normal_interval(est.point, {var}, *alpha);
        est.ci_low = ci.lo;
        est.ci_high = ci.hi;
        est.alpha = *alpha;
        est.method = CiMethod::KatzC;
    }
    return est;
}

// ---------------------------------------------------------------------------
// Cox, single binary covariate

namespace {

struct RiskPoint {
    double r0 = 0, r1 = 0;  ///< risk-set sizes
    double d = 0, d1 = 0;   ///< cause events total and in arm 1
};

std::vector<RiskPoint> cox_risk_points(std::span<const EventRecord> events, int cause) {
    check_cause(cause, false);
    const int other = 3 - cause;
    struct PerTime {
        std::array<double, 2> leaving{0, 0};
        std::array<double, 2> competing{0, 0};
        std::array<double, 2> cause_events{0, 0};
    };
    std::map<int, PerTime> by_time;
    for (const auto& e : events) {
        if (e.a != 0 && e.a != 1) throw DomainError("arm must be 0 or 1");
        auto& p = by_time[e.time];
        p.leaving[e.a] += 1;
        if (e.event == other) p.competing[e.a] += 1;
        if (e.event == cause) p.cause_events[e.a] += 1;
    }
    std::vector<RiskPoint> out;
    std::array<double, 2> later{0, 0};
    for (auto it = by_time.rbegin(); it != by_time.rend(); ++it) {
        const auto& p = it->second;
        std::array<double, 2> risk{};
        for (int a = 0; a < 2; ++a) risk[a] = later[a] + p.leaving[a] - p.competing[a];
        for (int a = 0; a < 2; ++a) later[a] += p.leaving[a];
        const double d = p.cause_events[0] + p.cause_events[1];
        if (d > 0) out.push_back({risk[0], risk[1], d, p.cause_events[1]});
    }
    return out;
}

double loglik_at(const std::vector<RiskPoint>& pts, double beta) {
    double l = 0;
    for (const auto& p : pts) l += p.d1 * beta - p.d * std::log(p.r0 + p.r1 * std::exp(beta));
    return l;
}

}  // namespace

double cox_log_partial_likelihood(std::span<const EventRecord> events, int cause, double beta) {
    return loglik_at(cox_risk_points(events, cause), beta);
}

CoxFit cox_fit(std::span<const EventRecord> events, int cause, const CoxOptions& options) {
    const auto pts = cox_risk_points(events, cause);
    const std::string label = "cause-" + std::to_string(cause) + " Cox fit";
    double d1_total = 0, d0_total = 0, up = 0, down = 0;
    for (const auto& p : pts) {
        d1_total += p.d1;
        d0_total += p.d - p.d1;
        up += p.d1 - (p.r1 > 0 ? p.d : 0.0);
        down += p.d1 - (p.r0 > 0 ? 0.0 : p.d);
    }
    if (d1_total == 0 || d0_total == 0)
        throw SeparationError(label + ": all events fall in one arm (" + std::to_string(int(d0_total)) + " vs " +
                              std::to_string(int(d1_total)) + ")");
    if (up >= 0 || down <= 0) throw SeparationError(label + ": partial likelihood is monotone in beta");

    auto score_info = [&](double beta) {
        double u = 0, info = 0;
        const double eb = std::exp(beta);
        for (const auto& p : pts) {
            const double s = p.r0 + p.r1 * eb;
            u += p.d1 - p.d * p.r1 * eb / s;
            info += p.d * p.r0 * p.r1 * eb / (s * s);
        }
        return std::pair{u, info};
    };

    CoxFit fit;
    fit.cause = cause;
    double beta = 0, ll = loglik_at(pts, beta);
    for (int it = 1; it <= options.max_iterations; ++it) {
        auto [u, info] = score_info(beta);
        fit.iterations = it - 1;
        if (std::fabs(u) < options.tolerance) {
            fit.converged = true;
            break;
        }
        if (!(info > 0)) throw CoxNoConverge(label + ": observed information vanished");
        double step = u / info;
        double next = beta + step, next_ll = loglik_at(pts, next);
        // Halve only steps large enough for the likelihood change to be resolvable.
        for (int halving = 0; halving < 60 && !(next_ll >= ll) && std::fabs(step) > 1e-8; ++halving) {
            step /= 2;
            next = beta + step;
            next_ll = loglik_at(pts, next);
        }
        beta = next;
        ll = next_ll;
        fit.iterations = it;
    }
    if (!fit.converged) {
        auto [u, info] = score_info(beta);
        (void)info;
        if (std::fabs(u) < options.tolerance) fit.converged = true;
    }
    if (!fit.converged)
        throw CoxNoConverge(label + ": no convergence within " + std::to_string(options.max_iterations) + " iterations");
    fit.beta = beta;
    fit.loglik = ll;
    fit.se = 1.0 / std::sqrt(score_info(beta).second);
    return fit;
}

RatioEstimate cse_cox(std::span<const EventRecord> events, const std::optional<BootstrapPlan>& plan,
                      std::size_t lanes) {
    const CoxFit f1 = cox_fit(events, 1);
    const CoxFit f2 = cox_fit(events, 2);
    RatioEstimate est;
    est.estimand = "cse_cox";
    est.stratum = "marginal";
    est.point = std::exp(f1.beta - f2.beta);
    est.assumptions = tte_cse_assumptions();
    est.assumptions.push_back(assumption::proportional_hazards);
    est.notes.push_back("beta1=" + format_number(f1.beta) + ", se1=" + format_number(f1.se));
    est.notes.push_back("beta2=" + format_number(f2.beta) + ", se2=" + format_number(f2.se));
    if (plan) {
        BootstrapPlan p = *plan;
        if (p.statistic.empty()) p.statistic = "cse_cox";
        const BootstrapResult res = bootstrap_ci(
            events.size(), p,
            [&](std::span<const std::size_t> idx) {
                std::vector<EventRecord> sample;
                sample.reserve(idx.size());
                for (auto i : idx) sample.push_back(events[i]);
                return std::exp(cox_fit(sample, 1).beta - cox_fit(sample, 2).beta);
            },
            lanes);
        est.ci_low = res.ci.lo;
        est.ci_high = res.ci.hi;
        est.alpha = p.alpha;
        est.method = CiMethod::Bootstrap;
        est.notes.push_back("bootstrap_kept=" + std::to_string(res.kept) + "/" + std::to_string(res.requested));
    }
    return est;
}

// ---------------------------------------------------------------------------
// Cox, several covariates

CoxModel cox_fit_multi(std::span<const EventRecord> events, int cause, const Eigen::MatrixXd& design,
                       const CoxOptions& options) {
    check_cause(cause, false);
    if (static_cast<std::size_t>(design.rows()) != events.size())
        throw DomainError("design matrix rows must match the number of events");
    const int other = 3 - cause;
    const Eigen::Index p = design.cols();
    const std::string label = "cause-" + std::to_string(cause) + " Cox model";

    std::vector<std::size_t> order(events.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return events[x].time > events[y].time; });

    struct Eval {
        double loglik = 0;
        Eigen::VectorXd score;
        Eigen::MatrixXd info;
    };
    auto evaluate_at = [&](const Eigen::VectorXd& beta) {
        Eval ev{0.0, Eigen::VectorXd::Zero(p), Eigen::MatrixXd::Zero(p, p)};
        // Risk-set sums over many subjects; compensated so the score is not swamped by round-off.
        double s0 = 0, c0 = 0;
        Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p), c1 = Eigen::VectorXd::Zero(p);
        Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
        auto add = [](double& sum, double& comp, double v) {
            const double t = sum + v;
            comp += std::fabs(sum) >= std::fabs(v) ? (sum - t) + v : (v - t) + sum;
            sum = t;
        };
        std::size_t i = 0;
        while (i < order.size()) {
            const int t = events[order[i]].time;
            std::size_t j = i;
            double d = 0;
            Eigen::VectorXd xsum = Eigen::VectorXd::Zero(p);
            auto join = [&](std::size_t idx) {
                const Eigen::VectorXd x = design.row(static_cast<Eigen::Index>(idx)).transpose();
                const double w = std::exp(x.dot(beta));
                add(s0, c0, w);
                for (Eigen::Index c = 0; c < p; ++c) add(s1(c), c1(c), w * x(c));
                s2 += w * x * x.transpose();
                return x;
            };
            for (; j < order.size() && events[order[j]].time == t; ++j) {
                const auto& e = events[order[j]];
                if (e.event == other) continue;
                const Eigen::VectorXd x = join(order[j]);
                if (e.event == cause) {
                    d += 1;
                    xsum += x;
                }
            }
            if (d > 0) {
                const double total = s0 + c0;
                const Eigen::VectorXd mean = (s1 + c1) / total;
                ev.loglik += xsum.dot(beta) - d * std::log(total);
                ev.score += xsum - d * mean;
                ev.info += d * (s2 / total - mean * mean.transpose());
            }
            // Competing events at t leave at the start of t but were at risk for every earlier time.
            for (std::size_t c = i; c < j; ++c)
                if (events[order[c]].event == other) join(order[c]);
            i = j;
        }
        return ev;
    };

    CoxModel model;
    model.cause = cause;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    Eval cur = evaluate_at(beta);
    for (int it = 1; it <= options.max_iterations; ++it) {
        if (cur.score.cwiseAbs().maxCoeff() < options.tolerance) {
            model.converged = true;
            break;
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt(cur.info);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 1e-12)
            throw SeparationError(label + ": information matrix is singular (a covariate level has no events?)");
        Eigen::VectorXd step = ldlt.solve(cur.score);
        Eigen::VectorXd next = beta + step;
        Eval cand = evaluate_at(next);
        for (int halving = 0; halving < 60 && !(cand.loglik >= cur.loglik) && step.norm() > 1e-8; ++halving) {
            step /= 2;
            next = beta + step;
            cand = evaluate_at(next);
        }
        beta = next;
        cur = std::move(cand);
        model.iterations = it;
    }
    if (!model.converged && cur.score.cwiseAbs().maxCoeff() < options.tolerance) model.converged = true;
    if (!model.converged)
        throw CoxNoConverge(label + ": no convergence within " + std::to_string(options.max_iterations) + " iterations");
    if (beta.cwiseAbs().maxCoeff() > 25) throw SeparationError(label + ": coefficients diverge (monotone likelihood)");
    Eigen::LDLT<Eigen::MatrixXd> ldlt(cur.info);
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 1e-12)
        throw SeparationError(label + ": information matrix is singular at the optimum");
    model.beta = beta;
    model.covariance = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
    model.loglik = cur.loglik;
    return model;
}

std::vector<std::string> tte_cse_assumptions() {
    return {assumption::tte_randomization,          assumption::tte_exposure_necessity,
            assumption::tte_no_cross_infectivity,   assumption::exposure_ratio_of_exposed,
            assumption::scaled_new_infection,       assumption::independent_censoring};
}

}  // namespace sievekit
