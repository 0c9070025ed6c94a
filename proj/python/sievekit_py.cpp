#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "sievekit/bounds.hpp"
#include "sievekit/cli.hpp"
#include "sievekit/dgp.hpp"
#include "sievekit/errors.hpp"
#include "sievekit/estimands.hpp"
#include "sievekit/hypothesis.hpp"
#include "sievekit/special_functions.hpp"
#include "sievekit/survival.hpp"
#include "sievekit/uncertainty.hpp"

namespace py = pybind11;
using namespace sievekit;

namespace {

using Matrix = std::array<std::array<std::int64_t, 3>, 2>;
using EventTuple = std::tuple<int, int, int>;

/// JSON crosses the boundary as text; the Python wrapper decodes it.
std::string dump(const nlohmann::json& j) { return j.dump(); }

CountTable table_from(const Matrix& n) { return CountTable{make_cells(n), {}, {}}; }

EstimatorOptions options(const std::string& ci, double alpha, double continuity) {
    return {continuity, ci == "auto" ? CiMethod::KatzC : parse_ci_method(ci), alpha};
}

std::vector<EventRecord> events_from(const std::vector<EventTuple>& rows) {
    std::vector<EventRecord> out;
    out.reserve(rows.size());
    for (const auto& [a, time, event] : rows) out.push_back({a, time, event, {}, 0});
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Variant-specific vaccine effect estimation";

    static py::exception<Error> base(m, "SievekitError", PyExc_ValueError);
    static py::exception<Error> usage(m, "UsageError", base.ptr());
    static py::exception<Error> data(m, "DataError", base.ptr());
    static py::exception<Error> degeneracy(m, "DegeneracyError", base.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            const std::string msg = e.kind() + ": " + e.what();
            switch (e.error_class()) {
                case ErrorClass::Usage: usage(msg.c_str()); break;
                case ErrorClass::Data: data(msg.c_str()); break;
                case ErrorClass::Degeneracy: degeneracy(msg.c_str()); break;
            }
        }
    });

    m.def("version", &cli::version);

    m.def(
        "rr",
        [](const Matrix& n, int variant, const std::string& ci, double alpha, double continuity) {
            return dump(rr(table_from(n), variant, StratumSelector::marginal(), options(ci, alpha, continuity)).to_json());
        },
        py::arg("counts"), py::arg("variant"), py::arg("ci") = "katz-c", py::arg("alpha") = 0.05,
        py::arg("continuity") = 0.0);
    m.def(
        "ccs",
        [](const Matrix& n, const std::string& ci, double alpha, double continuity) {
            return dump(ccs(table_from(n), StratumSelector::marginal(), CcsMode::Observed, options(ci, alpha, continuity))
                            .to_json());
        },
        py::arg("counts"), py::arg("ci") = "katz-c", py::arg("alpha") = 0.05, py::arg("continuity") = 0.0);
    m.def(
        "cce",
        [](const Matrix& n, const std::string& ci, double alpha) {
            return dump(cce(table_from(n), StratumSelector::marginal(), options(ci, alpha, 0)).to_json());
        },
        py::arg("counts"), py::arg("ci") = "katz-c", py::arg("alpha") = 0.05);
    m.def(
        "eie",
        [](const Matrix& n, const std::string& ci, double alpha) {
            return dump(eie(table_from(n), StratumSelector::marginal(), options(ci, alpha, 0)).to_json());
        },
        py::arg("counts"), py::arg("ci") = "katz-c", py::arg("alpha") = 0.05);
    m.def(
        "eet",
        [](const Matrix& n, std::optional<double> exposure_ratio, std::optional<double> ir0, const std::string& ci,
           double alpha) {
            EetRoute route{exposure_ratio, ir0, false};
            EstimatorOptions o{0.0, ci == "auto" ? (ir0 ? CiMethod::KatzC : CiMethod::TrinomialF) : parse_ci_method(ci),
                               alpha};
            return dump(eet(table_from(n), StratumSelector::marginal(), route, o).to_json());
        },
        py::arg("counts"), py::arg("exposure_ratio") = py::none(), py::arg("ir0") = py::none(),
        py::arg("ci") = "auto", py::arg("alpha") = 0.05);

    m.def(
        "eet_trinomial_ci",
        [](std::int64_t y1, std::int64_t y2, double alpha) {
            const Interval ci = eet_trinomial_ci(y1, y2, alpha);
            return std::pair{ci.lo, ci.hi};
        },
        py::arg("y1"), py::arg("y2"), py::arg("alpha") = 0.05);
    m.def("f_quantile", &f_quantile, py::arg("p"), py::arg("d1"), py::arg("d2"));
    m.def("normal_quantile", &normal_quantile, py::arg("p"));

    m.def(
        "acece_ratio_bounds",
        [](const std::array<double, 4>& p) { return dump(acece_ratio_bounds(OutcomeProbabilities::from_array(p)).to_json()); },
        py::arg("p"));
    m.def(
        "ve_ratio_bounds",
        [](const std::array<double, 4>& p, double baseline1, double baseline2) {
            return dump(ve_ratio_bounds(OutcomeProbabilities::from_array(p), BaselineRisks::point(baseline1, baseline2))
                            .to_json());
        },
        py::arg("p"), py::arg("baseline1"), py::arg("baseline2"));

    m.def("builtin_scenario", [](const std::string& id) { return dump(nlohmann::json(builtin_scenario(id))); },
          py::arg("id"));
    m.def("oracle", [](const std::string& spec) { return dump(oracle(nlohmann::json::parse(spec).get<DgpSpec>()).to_json()); },
          py::arg("spec_json"));
    m.def(
        "sample",
        [](const std::string& spec, std::size_t n, std::uint64_t seed, std::size_t lanes) {
            const auto records = sample(nlohmann::json::parse(spec).get<DgpSpec>(), n, seed, lanes);
            std::vector<int> a, y, e;
            for (const auto& r : records) {
                a.push_back(r.a);
                y.push_back(r.y);
                e.push_back(static_cast<int>(*r.e));
            }
            return py::dict(py::arg("a") = a, py::arg("y") = y, py::arg("e") = e);
        },
        py::arg("spec_json"), py::arg("n"), py::arg("seed"), py::arg("lanes") = 1);
    m.def(
        "sample_events",
        [](const std::string& spec, std::size_t n, std::uint64_t seed, std::size_t lanes) {
            std::vector<EventTuple> out;
            for (const auto& r : sample_events(nlohmann::json::parse(spec).get<DgpSpec>(), n, seed, lanes))
                out.emplace_back(r.a, r.time, r.event);
            return out;
        },
        py::arg("spec_json"), py::arg("n"), py::arg("seed"), py::arg("lanes") = 1);
    m.def("multi_exposure_probability", &multi_exposure_probability, py::arg("r"), py::arg("m"));

    m.def(
        "cumulative_incidence",
        [](const std::vector<std::array<double, 2>>& h1, const std::vector<std::array<double, 2>>& h2) {
            const IncidenceTable inc = cumulative_incidence(HazardTable::from_hazards(h1, h2));
            return py::dict(py::arg("mu1") = inc.mu[1], py::arg("mu2") = inc.mu[2], py::arg("survival") = inc.survival);
        },
        py::arg("h1"), py::arg("h2"));
    m.def(
        "cox_fit",
        [](const std::vector<EventTuple>& rows, int cause) {
            const CoxFit f = cox_fit(events_from(rows), cause);
            return py::dict(py::arg("beta") = f.beta, py::arg("se") = f.se, py::arg("iterations") = f.iterations,
                            py::arg("converged") = f.converged, py::arg("loglik") = f.loglik);
        },
        py::arg("events"), py::arg("cause"));
    m.def(
        "cse_cox", [](const std::vector<EventTuple>& rows) { return dump(cse_cox(events_from(rows)).to_json()); },
        py::arg("events"));
    m.def(
        "cse_k_nonparametric",
        [](const std::vector<EventTuple>& rows, int k, double alpha) {
            return dump(cse_k_nonparametric(discrete_hazards(events_from(rows)), k, alpha).to_json());
        },
        py::arg("events"), py::arg("k"), py::arg("alpha") = 0.05);
    m.def(
        "windowed_hazard_ratio",
        [](const std::vector<EventTuple>& rows, int first, int last, double alpha) {
            return dump(windowed_hazard_ratio(discrete_hazards(events_from(rows)), {first, last}, alpha).to_json());
        },
        py::arg("events"), py::arg("first"), py::arg("last"), py::arg("alpha") = 0.05);
    m.def(
        "strong_null_test",
        [](const std::vector<EventTuple>& rows, int first, int last, double alpha) {
            TestOptions o;
            o.alpha = alpha;
            return dump(strong_null_test(events_from(rows), {first, last}, o).to_json());
        },
        py::arg("events"), py::arg("first"), py::arg("last"), py::arg("alpha") = 0.05);
    m.def(
        "h0w_test",
        [](const std::vector<EventTuple>& rows, const std::vector<std::pair<int, int>>& windows, double alpha) {
            std::vector<Window> ws;
            for (const auto& [f, l] : windows) ws.push_back({f, l});
            TestOptions o;
            o.alpha = alpha;
            return dump(h0w_test(events_from(rows), ws, o).to_json());
        },
        py::arg("events"), py::arg("windows"), py::arg("alpha") = 0.05);

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code = 0;
            {
                py::gil_scoped_release release;
                code = cli::run(args, out, err);
            }
            return std::tuple{code, out.str(), err.str()};
        },
        py::arg("args"));
}
