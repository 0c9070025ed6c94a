#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sievekit/parallel.hpp"
#include "sievekit/special_functions.hpp"

namespace sievekit {

struct Interval {
    double lo = 0;
    double hi = 0;

    bool contains(double v) const { return lo <= v && v <= hi; }
    double width() const { return hi - lo; }
};

/// Variance of a log ratio.
struct LogVariance {
    double value = 0;
};

/// Events and totals of a two-arm risk ratio: (x1 / n1) / (x0 / n0).
struct RiskCells {
    double x1 = 0, n1 = 0, x0 = 0, n0 = 0;
};

/// Outcome counts n[a][y] as reals (continuity corrections may add 0.5).
using OutcomeCounts = std::array<std::array<double, 3>, 2>;

OutcomeCounts to_real(const std::array<std::array<std::int64_t, 3>, 2>& n);

/// Katz log-scale variance (1 - p1)/(n1 p1) + (1 - p0)/(n0 p0).
/// Throws DegenerateCounts unless 0 < x < n in both arms.
LogVariance katz_log_variance(const RiskCells& cells);

/// exp(log(point) +/- z_{1 - alpha/2} sqrt(var)).
Interval log_normal_interval(double point, LogVariance var, double alpha);

Interval katz_ci(double rr_point, const RiskCells& cells, double alpha);

enum class CcsCiMethod { Sum, Decomposition };

/// Interval for the observed-data CCS. `Sum` adds the two Katz variances of
/// the variant-specific risk ratios; `Decomposition` splits the CCS into
/// RR(Y=1) x [P(Y=2|A=0,Y!=1)/P(Y=2|A=1,Y!=1)] x [P(Y!=1|A=0)/P(Y!=1|A=1)] and
/// treats the outer two log factors as perfectly negatively correlated.
Interval ccs_ci(const OutcomeCounts& n, double alpha, CcsCiMethod method);

/// Interval for the exposure-conditional CCS from the E=1 and E=2 slices
/// (independent Katz variances).
Interval ccs_ci_exposure_conditional(const OutcomeCounts& slice_e1, const OutcomeCounts& slice_e2, double alpha);

/// Conservative interval for y1/y2 under trinomial sampling (conditional
/// binomial construction with F quantiles). `alpha` is the significance level.
Interval eet_trinomial_ci(std::int64_t y1, std::int64_t y2, double alpha);

// ---------------------------------------------------------------------------
// Bootstrap

struct BootstrapPlan {
    std::size_t replicates = 1000;
    std::uint64_t master_seed = 1;
    double alpha = 0.05;
    std::string statistic;  ///< label of the resampled statistic
};

struct BootstrapResult {
    Interval ci;
    std::size_t requested = 0;
    std::size_t kept = 0;
    std::size_t dropped = 0;  ///< replicates where the statistic was degenerate
    std::vector<double> values;  ///< kept replicate values, replicate order
};

/// Statistic evaluated on a resample given as unit indices (with repeats).
/// Throwing sievekit::Error marks the replicate as degenerate.
using ResampleStatistic = std::function<double(std::span<const std::size_t>)>;

/// Percentile bootstrap. Replicate r draws its indices from a stream keyed by
/// (master_seed, r), so the result is identical for any lane count.
/// Throws BootstrapFailure when every replicate is degenerate.
BootstrapResult bootstrap_ci(std::size_t n_units, const BootstrapPlan& plan, const ResampleStatistic& statistic,
                             std::size_t lanes = default_lanes());

/// Linear-interpolation sample quantile of sorted data.
double sorted_quantile(std::span<const double> sorted, double q);

}  // namespace sievekit
