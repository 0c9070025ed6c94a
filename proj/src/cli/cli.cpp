#include "sievekit/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "sievekit/bounds.hpp"
#include "sievekit/dgp.hpp"
#include "sievekit/errors.hpp"
#include "sievekit/estimands.hpp"
#include "sievekit/format.hpp"
#include "sievekit/hypothesis.hpp"
#include "sievekit/survival.hpp"
#include "sievekit/svg.hpp"
#include "sievekit/trial_data.hpp"

#ifndef SIEVEKIT_VERSION
#define SIEVEKIT_VERSION "0.0.0"
#endif

namespace sievekit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string version() { return SIEVEKIT_VERSION; }

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 computation failed");
    std::ostringstream o;
    for (unsigned int i = 0; i < len; ++i) o << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return o.str();
}

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return sha256_hex(buf.str());
}

namespace {

// ---------------------------------------------------------------------------
// Shared state and output plumbing

struct Globals {
    std::string data;
    std::string out_dir = ".";
    std::uint64_t seed = 1;
    double alpha = 0.05;
    std::string format = "json";
};

/// Files produced by one command; written together with the manifest.
class Outputs {
public:
    void add(const std::string& path, std::string content) { files_.emplace_back(path, std::move(content)); }
    void input(const std::string& path) { inputs_.push_back(path); }

    void write(const std::string& command, const std::vector<std::string>& argv, const Globals& g) const {
        json outs = json::array(), ins = json::array();
        for (const auto& [path, content] : files_) {
            const fs::path p(path);
            if (p.has_parent_path()) fs::create_directories(p.parent_path());
            std::ofstream f(path, std::ios::binary);
            if (!f) throw ConfigurationError("cannot write '" + path + "'");
            f << content;
            outs.push_back({{"path", path}, {"sha256", sha256_hex(content)}});
        }
        for (const auto& path : inputs_) ins.push_back({{"path", path}, {"sha256", sha256_file(path)}});
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&now, &tm);
        std::ostringstream ts;
        ts << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
        const json manifest{{"command", command},
                            {"argv", argv},
                            {"cwd", fs::current_path().string()},
                            {"seed", g.seed},
                            {"alpha", g.alpha},
                            {"version", version()},
                            {"timestamp", ts.str()},
                            {"inputs", ins},
                            {"outputs", outs}};
        fs::create_directories(g.out_dir);
        std::ofstream f(fs::path(g.out_dir) / "manifest.json", std::ios::binary);
        if (!f) throw ConfigurationError("cannot write manifest to '" + g.out_dir + "'");
        f << manifest.dump(2) << '\n';
    }

private:
    std::vector<std::pair<std::string, std::string>> files_;
    std::vector<std::string> inputs_;
};

std::string out_path(const Globals& g, const std::string& name) { return (fs::path(g.out_dir) / name).string(); }

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep))
        if (!cur.empty()) out.push_back(cur);
    return out;
}

double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigurationError("cannot parse " + what + " value '" + s + "'");
    }
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}

std::string join(const std::vector<std::string>& v, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
    return out;
}

std::string estimates_csv(const std::vector<RatioEstimate>& rows) {
    std::ostringstream o;
    o << "estimand,stratum,point,ci_low,ci_high,alpha,method,assumptions,notes\n";
    for (const auto& e : rows)
        o << csv_field(e.estimand) << ',' << csv_field(e.stratum) << ',' << format_number(e.point) << ','
          << (e.ci_low ? format_number(*e.ci_low) : "") << ',' << (e.ci_high ? format_number(*e.ci_high) : "") << ','
          << format_number(e.alpha) << ',' << to_string(e.method) << ',' << csv_field(join(e.assumptions, ";")) << ','
          << csv_field(join(e.notes, ";")) << '\n';
    return o.str();
}

json estimates_json(const std::vector<RatioEstimate>& rows) {
    json a = json::array();
    for (const auto& e : rows) a.push_back(e.to_json());
    return a;
}

void require_data(const Globals& g) {
    if (g.data.empty()) throw ConfigurationError("--data is required for this command");
}

/// Writes report.json and report.csv and echoes one of them.
void emit(Outputs& outs, const Globals& g, const json& report, const std::string& csv, std::ostream& out) {
    const std::string text = report.dump(2) + "\n";
    outs.add(out_path(g, "report.json"), text);
    outs.add(out_path(g, "report.csv"), csv);
    out << (g.format == "csv" ? csv : text);
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeArgs {
    std::vector<std::string> estimands{"ccs"};
    std::string ci = "auto";
    std::string stratify;
    std::string ccs_mode = "observed";
    std::string eet_route;  ///< empty: inferred from the supplied values
    std::optional<double> exposure_ratio;
    std::optional<double> ir0;
    double continuity = 0;
    std::size_t boot_reps = 1000;
    std::optional<double> threshold;
    std::string distance_column = "d";
    std::string rr_interpretation = "cece";
};

EetRoute make_route(const AnalyzeArgs& a) {
    if (a.exposure_ratio && a.ir0) throw ConflictingConfig("--exposure-ratio and --ir0 select different EET routes");
    std::string route = a.eet_route;
    if (route.empty()) route = a.exposure_ratio ? "supplied" : a.ir0 ? "ir0" : "equal";
    EetRoute r;
    if (route == "equal" || route == "measured") {
        if (a.exposure_ratio || a.ir0)
            throw ConflictingConfig("--eet-route " + route + " conflicts with a supplied ratio");
        r.measured = route == "measured";
    } else if (route == "supplied") {
        if (!a.exposure_ratio) throw ConfigurationError("--eet-route supplied needs --exposure-ratio");
        r.exposure_ratio = a.exposure_ratio;
    } else if (route == "ir0") {
        if (!a.ir0) throw ConfigurationError("--eet-route ir0 needs --ir0");
        r.ir0 = a.ir0;
    } else {
        throw ConfigurationError("unknown EET route '" + route + "'");
    }
    return r;
}

CiMethod resolve_ci(const std::string& requested, Estimand e, const EetRoute& route) {
    if (requested != "auto") return parse_ci_method(requested);
    if (e == Estimand::Eet && !route.ir0) return CiMethod::TrinomialF;
    return CiMethod::KatzC;
}

RatioEstimate compute_estimate(const CountTable& table, std::span<const SubjectRecord> records,
                               const EstimandSpec& spec, const AnalyzeArgs& a, const Globals& g) {
    const auto& o = spec.options;
    if (o.ci == CiMethod::Bootstrap) {
        RatioEstimate est = evaluate(table, spec);
        BootstrapPlan plan{a.boot_reps, g.seed, g.alpha, to_string(spec.estimand)};
        const BootstrapResult res = bootstrap_ci(records, plan, spec);
        est.ci_low = res.ci.lo;
        est.ci_high = res.ci.hi;
        est.method = CiMethod::Bootstrap;
        est.notes.push_back("bootstrap_kept=" + std::to_string(res.kept) + "/" + std::to_string(res.requested));
        return est;
    }
    const auto interp = a.rr_interpretation == "ate" ? RrInterpretation::AverageTreatmentEffect : RrInterpretation::Cece;
    switch (spec.estimand) {
        case Estimand::RrVariant1: return rr(table, 1, spec.stratum, o, interp);
        case Estimand::RrVariant2: return rr(table, 2, spec.stratum, o, interp);
        case Estimand::CcsObserved: return ccs(table, spec.stratum, CcsMode::Observed, o);
        case Estimand::CcsExposure: return ccs(table, spec.stratum, CcsMode::ExposureConditional, o);
        case Estimand::Cce: return cce(table, spec.stratum, o);
        case Estimand::Eie: return eie(table, spec.stratum, o);
        case Estimand::Eet: return eet(table, spec.stratum, spec.eet_route, o);
    }
    throw ConfigurationError("unknown estimand");
}

void cmd_analyze(const Globals& g, const AnalyzeArgs& a, Outputs& outs, std::ostream& out, std::ostream& err) {
    require_data(g);
    if (a.rr_interpretation != "cece" && a.rr_interpretation != "ate")
        throw ConfigurationError("--rr-interpretation must be cece or ate");
    std::optional<MarkDichotomizationConfig> mark;
    if (a.threshold) mark = MarkDichotomizationConfig{a.distance_column, *a.threshold};
    const auto records = ingest_time_fixed(g.data, mark);
    outs.input(g.data);
    const ValidationReport validation = validate(records);
    if (!validation.clean())
        err << "warning: " << validation.violations.size() << " assumption check violation(s); see report\n";
    const std::optional<std::string> stratify = a.stratify.empty() ? std::nullopt : std::optional(a.stratify);
    const CountTable table = tabulate(records, stratify);
    const CcsMode mode = a.ccs_mode == "exposure" ? CcsMode::ExposureConditional : CcsMode::Observed;
    if (a.ccs_mode != "observed" && a.ccs_mode != "exposure") throw ConfigurationError("--ccs-mode must be observed or exposure");
    const EetRoute route = make_route(a);

    std::vector<RatioEstimate> rows;
    json warnings = json::array();
    for (const auto& name : a.estimands) {
        EstimandSpec spec;
        spec.estimand = parse_estimand(name, mode);
        spec.eet_route = route;
        spec.options = {a.continuity, resolve_ci(a.ci, spec.estimand, route), g.alpha};
        std::vector<RatioEstimate> these;
        if (stratify) {
            for (const auto& level : table.levels()) {
                spec.stratum = StratumSelector::of(*stratify, level);
                these.push_back(compute_estimate(table, records, spec, a, g));
            }
            if (auto w = stratum_heterogeneity_warning(these)) warnings.push_back(*w);
        } else {
            these.push_back(compute_estimate(table, records, spec, a, g));
        }
        rows.insert(rows.end(), these.begin(), these.end());
    }
    json report{{"command", "analyze"},
                {"data", g.data},
                {"validation", validation.to_json()},
                {"counts", to_json(table)},
                {"estimates", estimates_json(rows)},
                {"warnings", warnings}};
    emit(outs, g, report, estimates_csv(rows), out);
}

// ---------------------------------------------------------------------------
// tte

struct TteArgs {
    std::vector<std::string> methods{"nonparam", "cox"};
    std::optional<int> k;
    std::vector<std::string> windows;
    std::size_t boot_reps = 0;
    std::string plot;
};

void cmd_tte(const Globals& g, const TteArgs& a, Outputs& outs, std::ostream& out, std::ostream& err) {
    require_data(g);
    const auto events = ingest_time_to_event(g.data);
    outs.input(g.data);
    const HazardTable h = discrete_hazards(events);
    const IncidenceTable inc = cumulative_incidence(h);
    const int K = h.horizon();
    std::vector<RatioEstimate> rows;
    json warnings = json::array();

    for (const auto& m : a.methods) {
        if (m == "nonparam") {
            if (a.k) {
                rows.push_back(cse_k_nonparametric(h, *a.k, g.alpha));
            } else {
                RatioEstimate est = windowed_hazard_ratio(h, {1, K}, g.alpha);
                est.estimand = "cse_nonparam_pooled";
                rows.push_back(est);
            }
        } else if (m == "cox") {
            std::optional<BootstrapPlan> plan;
            if (a.boot_reps > 0) plan = BootstrapPlan{a.boot_reps, g.seed, g.alpha, "cse_cox"};
            rows.push_back(cse_cox(events, plan));
        } else if (m == "nelson-aalen") {
            std::vector<Window> ws;
            for (const auto& w : a.windows) {
                const auto parsed = parse_windows(w);
                ws.insert(ws.end(), parsed.begin(), parsed.end());
            }
            if (ws.empty()) ws.push_back({1, K});
            for (const auto& w : ws) rows.push_back(windowed_hazard_ratio(h, w, g.alpha));
        } else {
            throw ConfigurationError("unknown tte method '" + m + "' (nonparam, cox, nelson-aalen)");
        }
    }

    json hazards = json::array();
    for (int k = 1; k <= K; ++k)
        for (int arm = 0; arm < 2; ++arm)
            hazards.push_back({{"k", k},
                               {"a", arm},
                               {"at_risk", h.at_risk(k, arm)},
                               {"h1", h.hazard(1, k, arm)},
                               {"h2", h.hazard(2, k, arm)},
                               {"mu1", inc.incidence(1, k, arm)},
                               {"mu2", inc.incidence(2, k, arm)},
                               {"survival", inc.survival_at(k, arm)}});
    json cce = nullptr;
    try {
        cce = cce_k(inc, K).to_json();
    } catch (const DegenerateIncidence& e) {
        warnings.push_back(std::string("cce_k not computable: ") + e.what());
        err << "warning: cce_k not computable: " << e.what() << '\n';
    }
    json report{{"command", "tte"}, {"data", g.data},       {"horizon", K},         {"estimates", estimates_json(rows)},
                {"cce_k", cce},     {"hazards", hazards}, {"warnings", warnings}};
    if (!a.plot.empty()) {
        LinePlot p{"Cumulative incidence", "interval k", "incidence", false, {}, std::nullopt, "oracle"};
        for (int j = 1; j <= 2; ++j)
            for (int arm = 0; arm < 2; ++arm) {
                PlotSeries s{"cause " + std::to_string(j) + ", a=" + std::to_string(arm), {}, {}};
                for (int k = 1; k <= K; ++k) {
                    s.x.push_back(k);
                    s.y.push_back(inc.incidence(j, k, arm));
                }
                p.series.push_back(s);
            }
        outs.add(a.plot, render_svg(p));
    }
    emit(outs, g, report, estimates_csv(rows), out);
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
    std::string scenario = "d1";
    std::string n_grid = "1e3,1e4";
    std::size_t reps = 100;
    std::vector<std::string> estimators;
    std::string out;
    std::string plot;
    std::size_t sample_n = 0;
    std::string emit_spec;
};

DgpSpec resolve_scenario(const std::string& s) {
    if (fs::exists(s)) return load_spec(s);
    try {
        return builtin_scenario(s);
    } catch (const ConfigurationError&) {
    }
    throw ConfigurationError("unknown scenario '" + s + "' (not a builtin id or an existing file)");
}

void cmd_simulate(const Globals& g, const SimulateArgs& a, Outputs& outs, std::ostream& out) {
    const DgpSpec spec = resolve_scenario(a.scenario);
    if (fs::exists(a.scenario)) outs.input(a.scenario);
    const OracleValues o = oracle(spec);
    if (!a.emit_spec.empty()) outs.add(a.emit_spec, json(spec).dump(2) + "\n");

    if (a.sample_n > 0) {
        std::ostringstream data;
        if (spec.is_tte()) write_time_to_event_csv(data, sample_events(spec, a.sample_n, g.seed));
        else write_time_fixed_csv(data, sample(spec, a.sample_n, g.seed));
        const std::string path = a.out.empty() ? out_path(g, "sample.csv") : a.out;
        outs.add(path, data.str());
        const json report{{"command", "simulate"}, {"scenario", spec.id}, {"sample_size", a.sample_n},
                          {"seed", g.seed},        {"sample", path},      {"oracle", o.to_json()}};
        emit(outs, g, report, data.str(), out);
        return;
    }

    std::vector<std::size_t> grid;
    for (const auto& t : split(a.n_grid, ',')) {
        const double v = parse_double(t, "--n-grid");
        if (!(v >= 1) || v != std::floor(v)) throw ConfigurationError("--n-grid entries must be positive integers");
        grid.push_back(static_cast<std::size_t>(v));
    }
    const auto estimators = a.estimators.empty() ? default_study_estimators(spec) : a.estimators;
    const StudyResult res = run_convergence_study(spec, grid, a.reps, estimators, g.seed);
    std::ostringstream rows, summary;
    res.write_rows_csv(rows);
    res.write_summary_csv(summary);
    outs.add(a.out.empty() ? out_path(g, "simulate_rows.csv") : a.out, rows.str());
    if (!a.plot.empty()) {
        LinePlot p{"Estimates by sample size (" + spec.id + ")", "n", "mean estimate", true, {}, std::nullopt, "oracle"};
        std::optional<double> ref;
        for (const auto& est : estimators) {
            PlotSeries s{est, {}, {}};
            for (const auto& row : res.summary)
                if (row.estimator == est) {
                    s.x.push_back(static_cast<double>(row.n));
                    s.y.push_back(row.mean);
                    if (!ref && row.oracle) ref = row.oracle;
                }
            p.series.push_back(s);
        }
        p.reference = ref;
        outs.add(a.plot, render_svg(p));
    }
    json report{{"command", "simulate"},  {"scenario", spec.id}, {"spec", json(spec)},
                {"replications", a.reps}, {"seed", g.seed},      {"oracle", o.to_json()}};
    report["study"] = res.to_json();
    emit(outs, g, report, summary.str(), out);
}

// ---------------------------------------------------------------------------
// bounds

struct BoundsArgs {
    std::string p;
    std::string baseline;
    std::string baseline_interval;
};

void cmd_bounds(const Globals& g, const BoundsArgs& a, Outputs& outs, std::ostream& out) {
    OutcomeProbabilities p;
    std::string source;
    if (!a.p.empty()) {
        if (!g.data.empty()) throw ConflictingConfig("give either --p or --data, not both");
        const auto parts = split(a.p, ',');
        if (parts.size() != 4) throw ConfigurationError("--p needs four comma-separated probabilities");
        std::array<double, 4> v{};
        for (int i = 0; i < 4; ++i) v[i] = parse_double(parts[i], "--p");
        p = OutcomeProbabilities::from_array(v);
        source = "supplied";
    } else {
        require_data(g);
        const auto records = ingest_time_fixed(g.data);
        outs.input(g.data);
        p = OutcomeProbabilities::from_counts(tabulate(records).marginal);
        source = "empirical";
    }
    std::vector<IntervalBound> results{acece_ratio_bounds(p)};
    if (!a.baseline.empty() && !a.baseline_interval.empty())
        throw ConflictingConfig("give either --baseline or --baseline-interval, not both");
    if (!a.baseline.empty()) {
        const auto parts = split(a.baseline, ',');
        if (parts.size() != 2) throw ConfigurationError("--baseline needs two values");
        results.push_back(ve_ratio_bounds(
            p, BaselineRisks::point(parse_double(parts[0], "--baseline"), parse_double(parts[1], "--baseline"))));
    } else if (!a.baseline_interval.empty()) {
        const auto parts = split(a.baseline_interval, ',');
        if (parts.size() != 2) throw ConfigurationError("--baseline-interval needs lo1:hi1,lo2:hi2");
        BaselineRisks b;
        for (int j = 0; j < 2; ++j) {
            const auto lh = split(parts[j], ':');
            if (lh.size() != 2) throw ConfigurationError("--baseline-interval needs lo1:hi1,lo2:hi2");
            auto& dst = j == 0 ? b.variant1 : b.variant2;
            dst = {parse_double(lh[0], "--baseline-interval"), parse_double(lh[1], "--baseline-interval")};
        }
        results.push_back(ve_ratio_bounds(p, b));
    }
    json arr = json::array();
    std::ostringstream csv;
    csv << "target,lo,hi,point_identified\n";
    for (const auto& b : results) {
        arr.push_back(b.to_json());
        csv << b.target << ',' << format_number(b.lo) << ',' << format_number(b.hi) << ','
            << (b.point_identified ? "true" : "false") << '\n';
    }
    const json report{{"command", "bounds"},
                      {"probabilities_source", source},
                      {"probabilities", {p.y1_a0, p.y1_a1, p.y2_a0, p.y2_a1}},
                      {"bounds", arr}};
    emit(outs, g, report, csv.str(), out);
}

// ---------------------------------------------------------------------------
// test

struct TestArgs {
    std::string null_id = "strong-sharp";
    std::optional<int> k;
    std::string window;
    std::string windows;
    std::string covariate;
    std::string route = "nonparam";
    std::string test_ci;
    std::size_t boot_reps = 1000;
    std::string reference;
};

void cmd_test(const Globals& g, const TestArgs& a, Outputs& outs, std::ostream& out) {
    require_data(g);
    const auto events = ingest_time_to_event(g.data);
    outs.input(g.data);
    BootstrapPlan plan{a.boot_reps, g.seed, g.alpha, ""};
    TestResult t;
    if (a.null_id == "strong-sharp") {
        if (a.k && !a.window.empty()) throw ConflictingConfig("give either --k or --window, not both");
        Window w{1, discrete_hazards(events).horizon()};
        if (a.k) w = {*a.k, *a.k};
        if (!a.window.empty()) w = parse_window(a.window);
        t = strong_null_test(events, w,
                             {g.alpha, a.test_ci.empty() ? TestCi::Delta : parse_test_ci(a.test_ci), plan, default_lanes()});
    } else if (a.null_id == "h0w") {
        if (a.windows.empty()) throw ConfigurationError("--null h0w needs --windows, e.g. 1:3,4:6");
        t = h0w_test(events, parse_windows(a.windows),
                     {g.alpha, a.test_ci.empty() ? TestCi::Delta : parse_test_ci(a.test_ci), plan, default_lanes()});
    } else if (a.null_id == "scaled-infection") {
        if (a.covariate.empty()) throw ConfigurationError("--null scaled-infection needs --covariate");
        FalsificationOptions o;
        o.alpha = g.alpha;
        o.route = parse_falsification_route(a.route);
        o.ci = a.test_ci.empty() ? TestCi::Bootstrap : parse_test_ci(a.test_ci);
        o.plan = plan;
        o.reference_level = a.reference;
        t = scaled_infection_falsification(events, a.covariate, o);
    } else {
        throw ConfigurationError("unknown --null '" + a.null_id + "' (strong-sharp, h0w, scaled-infection)");
    }
    std::ostringstream csv;
    csv << "null,statistic,ci_low,ci_high,null_value,alpha,reject,conclusion\n"
        << t.null_id << ',' << format_number(t.statistic) << ',' << format_number(t.ci_low) << ','
        << format_number(t.ci_high) << ',' << format_number(t.null_value) << ',' << format_number(t.alpha) << ','
        << (t.reject ? "true" : "false") << ',' << csv_field(t.conclusion) << '\n';
    const json report{{"command", "test"}, {"data", g.data}, {"result", t.to_json()}};
    emit(outs, g, report, csv.str(), out);
}

// ---------------------------------------------------------------------------
// validate

struct ValidateArgs {
    bool strict = false;
    std::optional<double> threshold;
    std::string distance_column = "d";
};

int cmd_validate(const Globals& g, const ValidateArgs& a, Outputs& outs, std::ostream& out) {
    require_data(g);
    std::optional<MarkDichotomizationConfig> mark;
    if (a.threshold) mark = MarkDichotomizationConfig{a.distance_column, *a.threshold};
    const auto records = ingest_time_fixed(g.data, mark);
    outs.input(g.data);
    const ValidationReport v = validate(records);
    std::ostringstream csv;
    csv << "rule,line,detail\n";
    for (const auto& viol : v.violations)
        csv << to_string(viol.rule) << ',' << viol.line << ',' << csv_field(viol.detail) << '\n';
    const json report{{"command", "validate"}, {"data", g.data}, {"records", records.size()}, {"validation", v.to_json()}};
    emit(outs, g, report, csv.str(), out);
    return a.strict && !v.clean() ? static_cast<int>(ErrorClass::Data) : 0;
}

// ---------------------------------------------------------------------------
// replay

int cmd_replay(const std::string& manifest_path, const std::string& out_dir_override, std::ostream& out,
               std::ostream& err) {
    std::ifstream in(manifest_path);
    if (!in) throw ParseError("cannot open manifest '" + manifest_path + "'");
    json m;
    try {
        in >> m;
    } catch (const json::exception& e) {
        throw ParseError(std::string("manifest is not valid JSON: ") + e.what());
    }
    std::vector<std::string> argv = m.at("argv").get<std::vector<std::string>>();
    for (const auto& input : m.at("inputs")) {
        const auto path = input.at("path").get<std::string>();
        if (sha256_file(path) != input.at("sha256").get<std::string>())
            throw DomainError("input '" + path + "' changed since the manifest was written");
    }
    std::map<std::string, std::string> rename;
    if (!out_dir_override.empty()) {
        std::string old_dir = ".";
        for (std::size_t i = 0; i + 1 < argv.size(); ++i)
            if (argv[i] == "--out-dir") old_dir = argv[i + 1];
        std::vector<std::string> next;
        for (std::size_t i = 0; i < argv.size(); ++i) {
            if (argv[i] == "--out-dir" && i + 1 < argv.size()) {
                ++i;
                continue;
            }
            next.push_back(argv[i]);
        }
        next.push_back("--out-dir");
        next.push_back(out_dir_override);
        argv = next;
        for (const auto& o : m.at("outputs")) {
            const fs::path p(o.at("path").get<std::string>());
            const auto rel = fs::relative(p, old_dir);
            if (!rel.empty() && *rel.begin() != "..") rename[p.string()] = (fs::path(out_dir_override) / rel).string();
        }
    }
    std::ostringstream sink;
    const int code = run(argv, sink, err);
    if (code != 0) return code;
    bool all_match = true;
    json checks = json::array();
    for (const auto& o : m.at("outputs")) {
        std::string path = o.at("path").get<std::string>();
        if (rename.count(path)) path = rename[path];
        const bool match = fs::exists(path) && sha256_file(path) == o.at("sha256").get<std::string>();
        all_match = all_match && match;
        checks.push_back({{"path", path}, {"match", match}});
    }
    out << json{{"command", "replay"}, {"manifest", manifest_path}, {"outputs", checks}, {"identical", all_match}}.dump(2)
        << '\n';
    if (!all_match) {
        err << "error: replayed outputs differ from the manifest\n";
        return static_cast<int>(ErrorClass::Data);
    }
    return 0;
}

}  // namespace

// ---------------------------------------------------------------------------

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Variant-specific vaccine effect estimation", "sievekit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", version());

    Globals g;
    app.add_option("--data", g.data, "input CSV");
    app.add_option("--out-dir", g.out_dir, "directory for reports and the manifest");
    app.add_option("--seed", g.seed, "random seed");
    app.add_option("--alpha", g.alpha, "significance level")->check(CLI::Range(0.0, 1.0));
    app.add_option("--format", g.format, "stdout format")->check(CLI::IsMember({"json", "csv"}));

    AnalyzeArgs aa;
    auto* analyze = app.add_subcommand("analyze", "time-fixed estimands with intervals");
    analyze->fallthrough();
    analyze->add_option("--estimand", aa.estimands, "rr1, rr2, ccs, ccs_exposure, cce, eie, eet")->delimiter(',');
    analyze->add_option("--ci", aa.ci, "auto, none, katz-c, decomposition, trinomial-f, bootstrap");
    analyze->add_option("--stratify", aa.stratify, "covariate to stratify by");
    analyze->add_option("--ccs-mode", aa.ccs_mode, "observed or exposure");
    analyze->add_option("--eet-route", aa.eet_route, "equal, measured, supplied or ir0");
    analyze->add_option("--exposure-ratio", aa.exposure_ratio, "supplied treated exposure ratio");
    analyze->add_option("--ir0", aa.ir0, "supplied infectivity ratio of the untreated");
    analyze->add_option("--continuity", aa.continuity, "continuity correction for zero cells");
    analyze->add_option("--boot-reps", aa.boot_reps, "bootstrap replicates");
    analyze->add_option("--threshold", aa.threshold, "dichotomize marks at this genetic distance");
    analyze->add_option("--distance-column", aa.distance_column, "distance column for --threshold");
    analyze->add_option("--rr-interpretation", aa.rr_interpretation, "cece or ate");

    TteArgs ta;
    auto* tte = app.add_subcommand("tte", "time-to-event estimands");
    tte->fallthrough();
    tte->add_option("--method", ta.methods, "nonparam, cox, nelson-aalen")->delimiter(',');
    tte->add_option("--k", ta.k, "interval for the nonparametric CSE_k");
    tte->add_option("--window", ta.windows, "Nelson-Aalen window(s) k1:k2");
    tte->add_option("--boot-reps", ta.boot_reps, "bootstrap replicates for the Cox CSE");
    tte->add_option("--plot", ta.plot, "cumulative incidence SVG");

    SimulateArgs sa;
    auto* simulate = app.add_subcommand("simulate", "convergence study or dataset draw from a scenario");
    simulate->fallthrough();
    simulate->add_option("--scenario", sa.scenario, "builtin id or JSON spec file");
    simulate->add_option("--n-grid", sa.n_grid, "sample sizes, e.g. 1e3,1e4,1e5");
    simulate->add_option("--reps", sa.reps, "replications per sample size");
    simulate->add_option("--estimators", sa.estimators, "estimators to run")->delimiter(',');
    simulate->add_option("--out", sa.out, "rows CSV (or dataset CSV with --sample)");
    simulate->add_option("--plot", sa.plot, "convergence SVG");
    simulate->add_option("--sample", sa.sample_n, "draw one dataset of this size instead of a study");
    simulate->add_option("--emit-spec", sa.emit_spec, "write the scenario JSON here");

    BoundsArgs ba;
    auto* bounds = app.add_subcommand("bounds", "partial identification bounds");
    bounds->fallthrough();
    bounds->add_option("--p", ba.p, "P(Y=1|A=0),P(Y=1|A=1),P(Y=2|A=0),P(Y=2|A=1)");
    bounds->add_option("--baseline", ba.baseline, "P(Y0=1|E=1),P(Y0=2|E=2)");
    bounds->add_option("--baseline-interval", ba.baseline_interval, "lo1:hi1,lo2:hi2");

    TestArgs xa;
    auto* test = app.add_subcommand("test", "null hypothesis and falsification tests");
    test->fallthrough();
    test->add_option("--null", xa.null_id, "strong-sharp, h0w or scaled-infection");
    test->add_option("--k", xa.k, "interval for the strong sharp null");
    test->add_option("--window", xa.window, "window k1:k2 for the strong sharp null");
    test->add_option("--windows", xa.windows, "windows for h0w, e.g. 1:3,4:6");
    test->add_option("--covariate", xa.covariate, "covariate for the falsification test");
    test->add_option("--route", xa.route, "nonparam or cox");
    test->add_option("--test-ci", xa.test_ci, "delta or bootstrap");
    test->add_option("--boot-reps", xa.boot_reps, "bootstrap replicates");
    test->add_option("--reference", xa.reference, "reference covariate level");

    ValidateArgs va;
    auto* validate_cmd = app.add_subcommand("validate", "assumption checks on time-fixed data");
    validate_cmd->fallthrough();
    validate_cmd->add_flag("--strict", va.strict, "exit 2 when violations are found");
    validate_cmd->add_option("--threshold", va.threshold, "dichotomize marks at this genetic distance");
    validate_cmd->add_option("--distance-column", va.distance_column, "distance column for --threshold");

    std::string manifest_path, replay_out_dir;
    auto* replay = app.add_subcommand("replay", "re-run a command from its manifest and compare outputs");
    replay->add_option("--manifest", manifest_path, "manifest.json")->required();
    replay->add_option("--into", replay_out_dir, "write replayed outputs to this directory");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : static_cast<int>(ErrorClass::Usage);
    }

    try {
        Outputs outs;
        std::string command;
        int code = 0;
        if (*analyze) {
            command = "analyze";
            cmd_analyze(g, aa, outs, out, err);
        } else if (*tte) {
            command = "tte";
            cmd_tte(g, ta, outs, out, err);
        } else if (*simulate) {
            command = "simulate";
            cmd_simulate(g, sa, outs, out);
        } else if (*bounds) {
            command = "bounds";
            cmd_bounds(g, ba, outs, out);
        } else if (*test) {
            command = "test";
            cmd_test(g, xa, outs, out);
        } else if (*validate_cmd) {
            command = "validate";
            code = cmd_validate(g, va, outs, out);
        } else if (*replay) {
            return cmd_replay(manifest_path, replay_out_dir, out, err);
        }
        outs.write(command, args, g);
        return code;
    } catch (const Error& e) {
        err << "error [" << e.kind() << "]: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error [ConfigurationError]: " << e.what() << '\n';
        return static_cast<int>(ErrorClass::Usage);
    }
}

}  // namespace sievekit::cli
