#include "sievekit/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "sievekit/errors.hpp"
#include "sievekit/rng.hpp"

namespace sievekit {

namespace {

void check_alpha(double alpha) {
    if (!(alpha > 0 && alpha < 1)) throw DomainError("alpha must lie in (0, 1), got " + std::to_string(alpha));
}

std::string fmt_cells(const RiskCells& c) {
    return "(x1=" + std::to_string(c.x1) + ", n1=" + std::to_string(c.n1) + ", x0=" + std::to_string(c.x0) +
           ", n0=" + std::to_string(c.n0) + ")";
}

}  // namespace

OutcomeCounts to_real(const std::array<std::array<std::int64_t, 3>, 2>& n) {
    OutcomeCounts out{};
    for (int a = 0; a < 2; ++a)
        for (int y = 0; y < 3; ++y) out[a][y] = static_cast<double>(n[a][y]);
    return out;
}

LogVariance katz_log_variance(const RiskCells& c) {
    if (!(c.x1 > 0 && c.x1 < c.n1 && c.x0 > 0 && c.x0 < c.n0))
        throw DegenerateCounts("Katz variance needs 0 < x < n in both arms " + fmt_cells(c));
    const double p1 = c.x1 / c.n1, p0 = c.x0 / c.n0;
    return {(1 - p1) / (c.n1 * p1) + (1 - p0) / (c.n0 * p0)};
}

Interval log_normal_interval(double point, LogVariance var, double alpha) {
    check_alpha(alpha);
    if (!(point > 0)) throw DegenerateCounts("log-scale interval needs a positive point estimate");
    const double z = normal_quantile(1 - alpha / 2);
    const double half = z * std::sqrt(var.value);
    const double centre = std::log(point);
    return {std::exp(centre - half), std::exp(centre + half)};
}

Interval katz_ci(double rr_point, const RiskCells& cells, double alpha) {
    return log_normal_interval(rr_point, katz_log_variance(cells), alpha);
}

Interval ccs_ci(const OutcomeCounts& n, double alpha, CcsCiMethod method) {
    const double n1 = n[1][0] + n[1][1] + n[1][2];
    const double n0 = n[0][0] + n[0][1] + n[0][2];
    const RiskCells rr1{n[1][1], n1, n[0][1], n0};
    const RiskCells rr2{n[1][2], n1, n[0][2], n0};
    const double point = (rr1.x1 / rr1.n1) / (rr1.x0 / rr1.n0) / ((rr2.x1 / rr2.n1) / (rr2.x0 / rr2.n0));

    if (method == CcsCiMethod::Sum) {
        const double v = katz_log_variance(rr1).value + katz_log_variance(rr2).value;
        return log_normal_interval(point, {v}, alpha);
    }

    // Decomposition: log CCS = X + M - W with X = log RR(Y=1),
    // M = log P(Y=2|A=0,Y!=1)/P(Y=2|A=1,Y!=1), W = log P(Y!=1|A=1)/P(Y!=1|A=0).
    const double m1 = n1 - n[1][1];
    const double m0 = n0 - n[0][1];
    const double var_x = katz_log_variance(rr1).value;
    const RiskCells middle{n[1][2], m1, n[0][2], m0};
    if (!(middle.x1 > 0 && middle.x1 < middle.n1 && middle.x0 > 0 && middle.x0 < middle.n0))
        throw DegenerateCounts("decomposition middle factor P(Y=2|A,Y!=1) has a boundary cell " + fmt_cells(middle));
    const double var_m = katz_log_variance(middle).value;
    const double var_w = katz_log_variance(RiskCells{m1, n1, m0, n0}).value;
    // Var(X + W) with correlation -1.
    const double sx = std::sqrt(var_x), sw = std::sqrt(var_w);
    const double var_outer = var_x + var_w - 2 * sx * sw;
    return log_normal_interval(point, {var_m + var_outer}, alpha);
}

Interval ccs_ci_exposure_conditional(const OutcomeCounts& e1, const OutcomeCounts& e2, double alpha) {
    const double e1_n1 = e1[1][0] + e1[1][1] + e1[1][2], e1_n0 = e1[0][0] + e1[0][1] + e1[0][2];
    const double e2_n1 = e2[1][0] + e2[1][1] + e2[1][2], e2_n0 = e2[0][0] + e2[0][1] + e2[0][2];
    const RiskCells rr1{e1[1][1], e1_n1, e1[0][1], e1_n0};
    const RiskCells rr2{e2[1][2], e2_n1, e2[0][2], e2_n0};
    const double point = (rr1.x1 / rr1.n1) / (rr1.x0 / rr1.n0) / ((rr2.x1 / rr2.n1) / (rr2.x0 / rr2.n0));
    const double v = katz_log_variance(rr1).value + katz_log_variance(rr2).value;
    return log_normal_interval(point, {v}, alpha);
}

Interval eet_trinomial_ci(std::int64_t y1, std::int64_t y2, double alpha) {
    check_alpha(alpha);
    if (y1 < 1 || y2 < 1)
        throw DegenerateCounts("trinomial interval needs y1 >= 1 and y2 >= 1, got (" + std::to_string(y1) + ", " +
                               std::to_string(y2) + ")");
    const double q = 1 - alpha / 2;
    const double f_lo = f_quantile(q, 2.0 * (y2 + 1), 2.0 * y1);
    const double f_hi = f_quantile(q, 2.0 * (y1 + 1), 2.0 * y2);
    const double lo = 1.0 / ((static_cast<double>(y2) + 1) / y1 * f_lo);
    const double hi = (static_cast<double>(y1) + 1) / y2 * f_hi;
    return {lo, hi};
}

double sorted_quantile(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw DomainError("quantile of an empty sample");
    if (sorted.size() == 1) return sorted.front();
    const double h = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

BootstrapResult bootstrap_ci(std::size_t n_units, const BootstrapPlan& plan, const ResampleStatistic& statistic,
                             std::size_t lanes) {
    check_alpha(plan.alpha);
    if (plan.replicates < 1) throw ConfigurationError("bootstrap needs at least one replicate");
    if (n_units == 0) throw DomainError("bootstrap on an empty sample");

    std::vector<std::optional<double>> slots(plan.replicates);
    parallel_for(plan.replicates, lanes, [&](std::size_t r) {
        CounterRng rng(plan.master_seed, r, 0xB007);
        std::vector<std::size_t> idx(n_units);
        for (auto& i : idx) i = static_cast<std::size_t>(rng.below(n_units));
        std::sort(idx.begin(), idx.end());
        try {
            const double v = statistic(idx);
            if (std::isfinite(v)) slots[r] = v;
        } catch (const Error&) {
        }
    });

    BootstrapResult res;
    res.requested = plan.replicates;
    for (const auto& s : slots)
        if (s) res.values.push_back(*s);
    res.kept = res.values.size();
    res.dropped = res.requested - res.kept;
    if (res.kept == 0)
        throw BootstrapFailure("all " + std::to_string(plan.replicates) + " bootstrap replicates of '" +
                               plan.statistic + "' were degenerate");
    std::vector<double> sorted = res.values;
    std::sort(sorted.begin(), sorted.end());
    res.ci = {sorted_quantile(sorted, plan.alpha / 2), sorted_quantile(sorted, 1 - plan.alpha / 2)};
    return res;
}

}  // namespace sievekit
