// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <atomic>
#include <boost/math/distributions/fisher_f.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "sievekit/bounds.hpp"
#include "sievekit/cli.hpp"
#include "sievekit/dgp.hpp"
#include "sievekit/errors.hpp"
#include "sievekit/estimands.hpp"
#include "sievekit/hypothesis.hpp"
#include "sievekit/parallel.hpp"
#include "sievekit/rng.hpp"
#include "sievekit/survival.hpp"
#include "sievekit/uncertainty.hpp"

using namespace sievekit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const std::function<Outcome()>& check) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::printf("[%s] criterion %2d  %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), o.detail.c_str(),
                secs);
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

bool within(double v, double target, double tol) { return std::abs(v - target) <= tol; }

CountTable draw_table(const std::string& id, std::size_t n, std::uint64_t seed) {
    return tabulate(sample(builtin_scenario(id), n, seed));
}

double reference_loglik(const std::vector<EventRecord>& data, double beta) {
    double ll = 0;
    int max_t = 0;
    for (const auto& e : data) max_t = std::max(max_t, e.time);
    for (int t = 1; t <= max_t; ++t) {
        double d = 0, d1 = 0, r0 = 0, r1 = 0;
        for (const auto& e : data) {
            if (e.time == t && e.event == 1) {
                d += 1;
                d1 += e.a;
            }
            if (e.time > t || (e.time == t && e.event != 2)) (e.a ? r1 : r0) += 1;
        }
        if (d > 0) ll += d1 * beta - d * std::log(r0 + r1 * std::exp(beta));
    }
    return ll;
}

double grid_search(const std::vector<EventRecord>& data) {
    double best = 0, best_ll = -INFINITY;
    for (long i = -100000; i <= 100000; ++i) {
        const double b = i * 1e-4;
        const double ll = reference_loglik(data, b);
        if (ll > best_ll) {
            best_ll = ll;
            best = b;
        }
    }
    double lo = best - 1e-4, hi = best + 1e-4;
    for (int i = 0; i < 80; ++i) {
        const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
        if (reference_loglik(data, m1) < reference_loglik(data, m2))
            lo = m1;
        else
            hi = m2;
    }
    return (lo + hi) / 2;
}

// Spread of a statistic across independent seeds at the same n; context for single-replicate checks.
std::string mc_spread(const std::string& id, const std::function<double(const CountTable&)>& stat) {
    const std::size_t reps = 20;
    std::vector<double> v(reps);
    const auto spec = builtin_scenario(id);
    parallel_for(reps, default_lanes(), [&](std::size_t r) { v[r] = stat(tabulate(sample(spec, 1000000, derive_key(99, r), 1))); });
    double m = 0, m2 = 0;
    for (double x : v) m += x / reps;
    for (double x : v) m2 += (x - m) * (x - m) / (reps - 1);
    return fmt("[%s over %zu other seeds: mean %.4f, sd %.4f]", id.c_str(), reps, m, std::sqrt(m2));
}

double exposure_ccs(const CountTable& t) { return ccs(t, StratumSelector::marginal(), CcsMode::ExposureConditional).point; }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

DgpSpec tte_with(std::array<double, 2> m) {
    auto s = builtin_scenario("tte_rare");
    s.tte->treatment_multiplier = m;
    return s;
}

}  // namespace

int main() {
    report(1, "d1 convergence at n=1e6", [] {
        const auto start = std::chrono::steady_clock::now();
        const auto t = draw_table("d1", 1000000, 20240101);
        const double obs = ccs(t).point;
        const double exp = ccs(t, StratumSelector::marginal(), CcsMode::ExposureConditional).point;
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return Outcome{within(obs, 1.0, 0.03) && within(exp, 1.0, 0.03) && secs < 30,
                       fmt("observed %.4f, exposure-conditional %.4f (target 1 +/- 0.03), %.2fs of 30s ", obs, exp, secs) +
                           mc_spread("d1", exposure_ccs)};
    });

    report(2, "d3 split at n=1e6", [] {
        const auto t = draw_table("d3", 1000000, 20240102);
        const double obs = ccs(t).point;
        const double exp = ccs(t, StratumSelector::marginal(), CcsMode::ExposureConditional).point;
        return Outcome{within(obs, 0.25, 0.03) && within(exp, 1.0, 0.03),
                       fmt("observed %.4f (0.25 +/- 0.03), exposure-conditional %.4f (1 +/- 0.03) ", obs, exp) +
                           mc_spread("d3", exposure_ccs)};
    });

    report(3, "EET scenarios", [] {
        const double truth = 1.8584;
        const double d4 = eet(draw_table("d4", 1000000, 20240103)).point;
        const auto t5 = draw_table("d5", 1000000, 20240104);
        const double naive = eet(t5).point;
        const double corrected = eet(t5, StratumSelector::marginal(), EetRoute{2.0, {}, false}).point;
        return Outcome{within(d4, truth, 0.05) && within(naive, 3.7168, 0.10) && within(corrected, truth, 0.05),
                       fmt("d4 %.4f (1.8584 +/- 0.05), d5 naive %.4f (3.7168 +/- 0.10), d5 corrected %.4f (1.8584 +/- 0.05) ",
                           d4, naive, corrected) +
                           mc_spread("d5", [](const CountTable& t) { return eet(t).point; })};
    });

    report(4, "multi-exposure probability", [] {
        const double v = multi_exposure_probability(0.0036, 5);
        char sig[32];
        std::snprintf(sig, sizeof sig, "%.3g", v);
        return Outcome{std::string(sig) == "0.000129", fmt("%.6g rounds to %s (expected 0.000129)", v, sig)};
    });

    report(5, "Katz-C coverage on d1", [] {
        const std::size_t reps = 2000;
        std::vector<int> covered(reps, 0), narrower(reps, 0);
        const auto spec = builtin_scenario("d1");
        parallel_for(reps, default_lanes(), [&](std::size_t r) {
            const auto t = tabulate(sample(spec, 5000, derive_key(555, r), 1));
            const auto n = to_real(t.marginal.n);
            const Interval s = ccs_ci(n, 0.05, CcsCiMethod::Sum);
            const Interval d = ccs_ci(n, 0.05, CcsCiMethod::Decomposition);
            covered[r] = s.contains(1.0);
            narrower[r] = d.width() <= s.width();
        });
        double cov = 0;
        std::size_t ok = 0;
        for (std::size_t r = 0; r < reps; ++r) {
            cov += covered[r];
            ok += narrower[r];
        }
        cov /= reps;
        return Outcome{cov >= 0.93 && cov <= 0.99 && ok == reps,
                       fmt("coverage %.4f in [0.93, 0.99]; decomposition not wider in %zu/%zu", cov, ok, reps)};
    });

    report(6, "trinomial F interval", [] {
        CounterRng rng(606, 0);
        int covered = 0, usable = 0;
        for (int i = 0; i < 5000; ++i) {
            std::int64_t y1 = 0, y2 = 0;
            for (int s = 0; s < 2000; ++s) {
                const double u = rng.uniform();
                y1 += u < 0.02;
                y2 += u >= 0.02 && u < 0.04;
            }
            ++usable;
            if (y1 == 0 || y2 == 0) continue;  // the interval is undefined here; counted as a miss
            covered += eet_trinomial_ci(y1, y2, 0.05).contains(1.0);
        }
        const double cov = static_cast<double>(covered) / usable;

        double worst = 0;
        for (int i = 0; i < 50; ++i) {
            const auto y1 = 1 + static_cast<std::int64_t>(rng.below(200));
            const auto y2 = 1 + static_cast<std::int64_t>(rng.below(200));
            const double alpha = 0.01 + 0.5 * rng.uniform();
            const double q = 1 - alpha / 2;
            auto fq = [](double p, double d1, double d2) {
                return boost::math::quantile(boost::math::fisher_f_distribution<double>(d1, d2), p);
            };
            const double lo = y1 / ((y2 + 1.0) * fq(q, 2.0 * (y2 + 1), 2.0 * y1));
            const double hi = (y1 + 1.0) * fq(q, 2.0 * (y1 + 1), 2.0 * y2) / y2;
            const Interval ci = eet_trinomial_ci(y1, y2, alpha);
            worst = std::max({worst, std::abs(ci.lo - lo) / lo, std::abs(ci.hi - hi) / hi});
        }
        return Outcome{cov >= 0.95 && worst <= 1e-8,
                       fmt("coverage %.4f (>= 0.95); max relative endpoint gap vs F oracle %.2e (<= 1e-8)", cov, worst)};
    });

    report(7, "rare-event Cox vs nonparametric CSE", [] {
        const auto spec = builtin_scenario("tte_rare");
        const double truth = *oracle(spec).cse;
        const auto data = sample_events(spec, 100000, 707);
        const auto h = discrete_hazards(data);
        const double nonparam = windowed_hazard_ratio(h, {1, h.horizon()}, {}).point;
        const double cox = cse_cox(data).point;
        const double gap = std::abs(cox - nonparam) / nonparam;
        return Outcome{gap <= 0.05 && std::abs(cox - truth) <= 0.1 * truth && std::abs(nonparam - truth) <= 0.1 * truth,
                       fmt("cox %.4f, nonparametric %.4f, relative gap %.4f (<= 0.05), oracle %.4f (+/- 10%%)", cox,
                           nonparam, gap, truth)};
    });

    report(8, "incidence conservation", [] {
        CounterRng rng(808, 0);
        double worst = 0;
        for (int t = 0; t < 100; ++t) {
            const int K = 1 + static_cast<int>(rng.below(30));
            std::vector<std::array<double, 2>> h1(K), h2(K);
            for (int k = 0; k < K; ++k)
                for (int a = 0; a < 2; ++a) {
                    h1[k][a] = rng.uniform();
                    h2[k][a] = rng.uniform() * (1 - h1[k][a]);
                }
            const auto inc = cumulative_incidence(HazardTable::from_hazards(h1, h2));
            for (int k = 1; k <= K; ++k)
                for (int a = 0; a < 2; ++a)
                    worst = std::max(worst, std::abs(inc.incidence(1, k, a) + inc.incidence(2, k, a) +
                                                     inc.survival_at(k, a) - 1));
        }
        return Outcome{worst <= 1e-12, fmt("max |mu1 + mu2 + S - 1| = %.2e over 100 tables (<= 1e-12)", worst)};
    });

    report(9, "bounds containment", [] {
        CounterRng rng(909, 0);
        int contained = 0;
        for (int i = 0; i < 50; ++i) {
            DgpSpec s;
            s.beta0 = -2.5 + 3 * rng.uniform();
            s.beta_e = {0, 4 * rng.uniform() - 2, 4 * rng.uniform() - 2};
            s.beta_ea = {-0.1 - 3 * rng.uniform(), -0.1 - 3 * rng.uniform()};
            const double e1 = 0.02 + 0.48 * rng.uniform(), e2 = 0.02 + 0.48 * rng.uniform();
            s.exposure_law = {{{1 - e1 - e2, e1, e2}, {1 - e1 - e2, e1, e2}}};
            const auto o = oracle(s);
            const auto p = outcome_probabilities(s);
            const auto b = acece_ratio_bounds(OutcomeProbabilities::from_array({p[0][0], p[1][0], p[0][1], p[1][1]}));
            contained += o.acece_ratio && b.contains(*o.acece_ratio);
        }
        int exact = 0;
        for (int i = 0; i < 50; ++i) {
            const auto b = acece_ratio_bounds(
                OutcomeProbabilities::from_array({1.0, 0.05 + 0.9 * rng.uniform(), 1.0, 0.05 + 0.9 * rng.uniform()}));
            exact += b.lo == b.hi;
        }
        return Outcome{contained == 50 && exact == 50,
                       fmt("oracle inside bounds %d/50; baselines-one configs with lo == hi %d/50", contained, exact)};
    });

    report(10, "Cox Newton vs grid search", [] {
        CounterRng rng(1010, 0);
        int fitted = 0, attempts = 0;
        double worst = 0;
        while (fitted < 20 && attempts < 10000) {
            ++attempts;
            const int n = 4 + static_cast<int>(rng.below(5));
            std::vector<EventRecord> data;
            for (int i = 0; i < n; ++i)
                data.push_back({static_cast<int>(rng.below(2)), 1 + static_cast<int>(rng.below(4)),
                                static_cast<int>(rng.below(3)), {}, 0});
            CoxFit fit;
            try {
                fit = cox_fit(data, 1);
            } catch (const SeparationError&) {
                continue;  // no finite maximizer to compare against
            }
            worst = std::max(worst, std::abs(fit.beta - grid_search(data)));
            ++fitted;
        }
        return Outcome{fitted == 20 && worst <= 1e-3,
                       fmt("%d datasets, max |beta_newton - beta_grid| = %.2e (<= 1e-3)", fitted, worst)};
    });

    report(11, "determinism across 1, 2, 8 lanes", [] {
        const fs::path root = fs::temp_directory_path() / ("sievekit_acceptance_" + std::to_string(::getpid()));
        fs::remove_all(root);
        fs::create_directories(root);
        {
            std::ofstream out(root / "trial.csv");
            write_time_fixed_csv(out, sample(builtin_scenario("d2"), 4000, 11, 1));
            std::ofstream ev(root / "events.csv");
            write_time_to_event_csv(ev, sample_events(builtin_scenario("tte_rare"), 20000, 12, 1));
        }
        struct Job {
            std::string name;
            std::vector<std::string> args;
            std::vector<std::string> files;
        };
        const std::string trial = (root / "trial.csv").string(), events = (root / "events.csv").string();
        const std::vector<Job> jobs{
            {"bootstrap", {"analyze", "--data", trial, "--estimand", "ccs,eet", "--ci", "bootstrap", "--boot-reps", "400",
                           "--seed", "3"}, {"report.json", "report.csv"}},
            {"tte-bootstrap", {"tte", "--data", events, "--method", "cox", "--boot-reps", "100", "--seed", "4"},
             {"report.json", "report.csv"}},
            {"test-bootstrap", {"test", "--data", events, "--null", "strong-sharp", "--window", "1:12", "--test-ci",
                                "bootstrap", "--boot-reps", "100", "--seed", "5"}, {"report.json"}},
            {"simulate", {"simulate", "--scenario", "d1", "--n-grid", "1e3,4e3", "--reps", "20", "--seed", "6"},
             {"report.json", "report.csv", "rows.csv"}},
            {"sample", {"simulate", "--scenario", "tte_rare", "--sample", "5000", "--seed", "7"},
             {"report.json", "sample.csv"}},
        };
        std::vector<std::string> mismatches;
        int compared = 0;
        for (const auto& job : jobs) {
            std::vector<std::string> reference;
            for (const char* lanes : {"1", "2", "8"}) {
                ::setenv("SIEVEKIT_THREADS", lanes, 1);
                // Same command line for every lane count; only SIEVEKIT_THREADS changes.
                const fs::path dir = root / job.name;
                fs::remove_all(dir);
                auto args = job.args;
                args.insert(args.end(), {"--out-dir", dir.string()});
                if (job.name == "simulate") args.insert(args.end(), {"--out", (dir / "rows.csv").string()});
                if (job.name == "sample") args.insert(args.end(), {"--out", (dir / "sample.csv").string()});
                std::ostringstream out, err;
                if (cli::run(args, out, err) != 0) {
                    mismatches.push_back(job.name + " failed: " + err.str());
                    break;
                }
                std::vector<std::string> bytes;
                for (const auto& f : job.files) bytes.push_back(slurp(dir / f));
                if (reference.empty()) {
                    reference = bytes;
                } else {
                    for (std::size_t i = 0; i < bytes.size(); ++i) {
                        ++compared;
                        if (bytes[i] != reference[i] || bytes[i].empty())
                            mismatches.push_back(job.name + "/" + job.files[i] + " lanes=" + lanes);
                    }
                }
            }
        }
        ::unsetenv("SIEVEKIT_THREADS");
        fs::remove_all(root);
        std::string detail = fmt("%d file comparisons against the 1-lane run", compared);
        for (const auto& m : mismatches) detail += "; mismatch " + m;
        return Outcome{mismatches.empty() && compared > 0, detail};
    });

    report(12, "strong sharp null calibration and power", [] {
        const std::size_t null_reps = 2000, power_reps = 200;
        const auto null_spec = tte_with({0.7, 0.7});
        const auto alt_spec = tte_with({0.3, 0.7});
        std::vector<int> null_reject(null_reps, 0), alt_reject(power_reps, 0);
        std::atomic<int> failed{0};
        TestOptions o;
        o.lanes = 1;
        parallel_for(null_reps, default_lanes(), [&](std::size_t r) {
            try {
                null_reject[r] = strong_null_test(sample_events(null_spec, 20000, derive_key(1212, r), 1), {1, 12}, o).reject;
            } catch (const Error&) {
                ++failed;
            }
        });
        parallel_for(power_reps, default_lanes(), [&](std::size_t r) {
            try {
                alt_reject[r] = strong_null_test(sample_events(alt_spec, 100000, derive_key(1213, r), 1), {1, 12}, o).reject;
            } catch (const Error&) {
                ++failed;
            }
        });
        double type1 = 0, power = 0;
        for (int v : null_reject) type1 += v;
        for (int v : alt_reject) power += v;
        type1 /= null_reps;
        power /= power_reps;
        return Outcome{type1 >= 0.03 && type1 <= 0.07 && power >= 0.9 && failed == 0,
                       fmt("type-I %.4f in [0.03, 0.07] over %zu null runs (n=2e4); power %.3f (>= 0.9) over %zu runs "
                           "at n=1e5; %d degenerate",
                           type1, null_reps, power, power_reps, failed.load())};
    });

    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
