#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sievekit/cli.hpp"
#include "sievekit/dgp.hpp"
#include "sievekit/trial_data.hpp"

using namespace sievekit;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run cli_run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("sievekit_cli_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

void write_counts(const fs::path& p, const std::array<std::array<int, 3>, 2>& n, bool with_risk = false) {
    std::ofstream out(p);
    out << (with_risk ? "a,y,risk\n" : "a,y\n");
    for (int a = 0; a < 2; ++a)
        for (int y = 0; y < 3; ++y)
            for (int i = 0; i < n[a][y]; ++i) {
                out << a << "," << y;
                if (with_risk) out << "," << (i % 2 ? "high" : "low");
                out << "\n";
            }
}

void write_events(const fs::path& p, const std::vector<EventRecord>& events) {
    std::ofstream out(p);
    write_time_to_event_csv(out, events);
}

}  // namespace

TEST_CASE("analyze ccs on the worked counts") {
    const auto dir = scratch("analyze");
    write_counts(dir / "d.csv", {{{800, 100, 100}, {900, 40, 60}}});
    const auto r = cli_run({"analyze", "--data", (dir / "d.csv").string(), "--estimand", "ccs", "--ci", "katz-c",
                            "--alpha", "0.05", "--out-dir", (dir / "o").string()});
    REQUIRE(r.code == 0);
    const auto report = read_json(dir / "o" / "report.json");
    const auto& est = report["estimates"][0];
    CHECK(est["point"].get<double>() == doctest::Approx(2.0 / 3.0));
    CHECK(est["ci"][0].get<double>() < 2.0 / 3.0);
    CHECK(est["ci"][1].get<double>() > 2.0 / 3.0);
    CHECK(fs::exists(dir / "o" / "manifest.json"));
    CHECK(fs::exists(dir / "o" / "report.csv"));
}

TEST_CASE("stratified eie gives one row per level") {
    const auto dir = scratch("strata");
    write_counts(dir / "d.csv", {{{800, 100, 100}, {900, 40, 60}}}, true);
    const auto r = cli_run({"analyze", "--data", (dir / "d.csv").string(), "--estimand", "eie", "--stratify", "risk",
                            "--out-dir", (dir / "o").string()});
    REQUIRE(r.code == 0);
    const auto report = read_json(dir / "o" / "report.json");
    REQUIRE(report["estimates"].size() == 2);
    CHECK(report["estimates"][0]["stratum"] == "risk=high");
    CHECK(report["estimates"][1]["stratum"] == "risk=low");
}

TEST_CASE("exit codes partition error classes") {
    const auto dir = scratch("codes");
    {
        std::ofstream out(dir / "noy.csv");
        out << "a,z\n1,0\n";
    }
    const auto missing = cli_run({"analyze", "--data", (dir / "noy.csv").string(), "--out-dir", dir.string()});
    CHECK(missing.code == 2);
    CHECK(missing.err.find("y") != std::string::npos);

    CHECK(cli_run({"analyze", "--bogus-flag"}).code == 1);
    CHECK(cli_run({"bounds", "--p", "0.05,0.10,0.20,0.10", "--out-dir", dir.string()}).code == 3);

    write_counts(dir / "zero.csv", {{{800, 0, 100}, {900, 40, 60}}});
    CHECK(cli_run({"analyze", "--data", (dir / "zero.csv").string(), "--estimand", "ccs", "--out-dir", dir.string()})
              .code == 3);
    CHECK(cli_run({"analyze", "--data", (dir / "zero.csv").string(), "--estimand", "ccs", "--continuity", "0.5",
                   "--out-dir", dir.string()})
              .code == 0);
}

TEST_CASE("bounds command") {
    const auto dir = scratch("bounds");
    const auto r = cli_run({"bounds", "--p", "0.10,0.05,0.20,0.10", "--out-dir", dir.string()});
    REQUIRE(r.code == 0);
    const auto report = read_json(dir / "report.json");
    const auto text = report.dump();
    CHECK(text.find("\"lo\":0.1") != std::string::npos);
    CHECK(text.find("\"hi\":5.0") != std::string::npos);
}

TEST_CASE("tte methods and nelson-aalen window") {
    const auto dir = scratch("tte");
    write_events(dir / "e.csv", sample_events(builtin_scenario("tte_rare"), 100000, 3));
    const auto r = cli_run({"tte", "--data", (dir / "e.csv").string(), "--out-dir", (dir / "a").string()});
    REQUIRE(r.code == 0);
    const auto report = read_json(dir / "a" / "report.json");
    double cox = 0, nonparam = 0;
    for (const auto& e : report["estimates"]) {
        if (e["estimand"] == "cse_cox") cox = e["point"].get<double>();
        if (e["estimand"] == "cse_nonparam_pooled") nonparam = e["point"].get<double>();
    }
    REQUIRE(cox > 0);
    REQUIRE(nonparam > 0);
    CHECK(cox == doctest::Approx(nonparam).epsilon(0.05));

    const auto na = cli_run({"tte", "--data", (dir / "e.csv").string(), "--method", "nelson-aalen", "--window", "1:3",
                             "--out-dir", (dir / "b").string()});
    REQUIRE(na.code == 0);
    const auto rows = read_json(dir / "b" / "report.json")["estimates"];
    REQUIRE(rows.size() == 1);
    CHECK(rows[0]["stratum"] == "window=1:3");
}

TEST_CASE("h0w on exchangeable data does not reject") {
    const auto dir = scratch("h0w");
    std::vector<EventRecord> events;
    for (auto r : sample_events(builtin_scenario("tte_rare"), 5000, 8))
        for (int a = 0; a < 2; ++a) {
            r.a = a;
            events.push_back(r);
            if (r.event) {
                auto s = r;
                s.event = 3 - r.event;
                events.push_back(s);
            }
        }
    write_events(dir / "e.csv", events);
    const auto r = cli_run({"test", "--data", (dir / "e.csv").string(), "--null", "h0w", "--windows", "1:3,4:6",
                            "--out-dir", dir.string()});
    REQUIRE(r.code == 0);
    CHECK(read_json(dir / "report.json")["result"]["reject"] == false);
}

TEST_CASE("simulate writes a convergence table and a plot") {
    const auto dir = scratch("simulate");
    const auto r = cli_run({"simulate", "--scenario", "d3", "--reps", "20", "--n-grid", "2e4,1e5", "--seed", "1",
                            "--out", (dir / "rows.csv").string(), "--plot", (dir / "plot.svg").string(), "--out-dir",
                            dir.string()});
    REQUIRE(r.code == 0);
    CHECK(slurp(dir / "plot.svg").find("<svg") != std::string::npos);
    const auto report = read_json(dir / "report.json");
    bool seen = false;
    for (const auto& s : report["study"]["summary"])
        if (s["estimator"] == "ccs_observed" && s["n"] == 100000) {
            seen = true;
            CHECK(std::abs(s["mean"].get<double>() - 0.25) < 3 * s["mc_se"].get<double>() + 0.01);
        }
    CHECK(seen);
}

TEST_CASE("bootstrap runs are reproducible and replay verifies outputs") {
    const auto dir = scratch("replay");
    write_counts(dir / "d.csv", {{{800, 100, 100}, {900, 40, 60}}});
    std::vector<std::string> args{"analyze", "--data", (dir / "d.csv").string(), "--estimand", "ccs", "--ci",
                                  "bootstrap", "--boot-reps", "500", "--seed", "7"};
    auto first = args;
    first.insert(first.end(), {"--out-dir", (dir / "a").string()});
    auto second = args;
    second.insert(second.end(), {"--out-dir", (dir / "b").string()});
    REQUIRE(cli_run(first).code == 0);
    REQUIRE(cli_run(second).code == 0);
    CHECK(slurp(dir / "a" / "report.json") == slurp(dir / "b" / "report.json"));

    const auto replay = cli_run({"replay", "--manifest", (dir / "a" / "manifest.json").string(), "--into",
                                 (dir / "c").string()});
    CHECK(replay.code == 0);
    CHECK(slurp(dir / "c" / "report.json") == slurp(dir / "a" / "report.json"));

    {
        std::ofstream tamper(dir / "d.csv", std::ios::app);
        tamper << "1,0\n";
    }
    CHECK(cli_run({"replay", "--manifest", (dir / "a" / "manifest.json").string(), "--into", (dir / "d").string()})
              .code != 0);
}

TEST_CASE("validate reports violations and strict mode fails") {
    const auto dir = scratch("validate");
    {
        std::ofstream out(dir / "d.csv");
        out << "a,y,e\n1,2,1\n0,1,1\n0,0,0\n";
    }
    const auto lax = cli_run({"validate", "--data", (dir / "d.csv").string(), "--out-dir", dir.string()});
    CHECK(lax.code == 0);
    CHECK(read_json(dir / "report.json")["validation"]["counts"]["no_cross_infectivity"] == 1);
    CHECK(cli_run({"validate", "--data", (dir / "d.csv").string(), "--strict", "--out-dir", dir.string()}).code == 2);
}

TEST_CASE("sha256 of a known string") {
    CHECK(cli::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
