#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace sievekit {

/// Exposure status. `Both` is retained in the data model but excluded by
/// estimators that rely on unique exposure.
enum class Exposure : std::uint8_t { None = 0, Variant1 = 1, Variant2 = 2, Both = 3 };

std::string to_string(Exposure e);
Exposure parse_exposure(const std::string& token);

using Covariates = std::map<std::string, std::string>;

/// One time-fixed trial participant.
struct SubjectRecord {
    int a = 0;                       ///< treatment arm, 0 or 1
    int y = 0;                       ///< 0 no infection, 1 variant 1, 2 variant 2
    std::optional<Exposure> e;       ///< absent when unmeasured
    std::optional<double> distance;  ///< genetic distance of the infecting virus, if recorded
    Covariates l;
    std::size_t line = 0;            ///< 1-based source line, 0 for generated records

    friend bool operator==(const SubjectRecord&, const SubjectRecord&) = default;
};

/// One time-to-event participant: first event or censoring.
struct EventRecord {
    int a = 0;
    int time = 1;   ///< interval index k >= 1
    int event = 0;  ///< 0 censored, 1 or 2 infection type
    Covariates l;
    std::size_t line = 0;

    friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

/// Infected rows map to variant 1 when distance < threshold, variant 2 otherwise.
/// Ties (distance == threshold) go to variant 2.
struct MarkDichotomizationConfig {
    std::string distance_column = "d";
    double threshold = 0.0;
};

// ---------------------------------------------------------------------------
// Counts

/// n[a][y] for one stratum, optionally sliced by exposure.
struct CellCounts {
    std::array<std::array<std::int64_t, 3>, 2> n{};
    /// by_exposure[e][a][y], e indexed by Exposure (0, 1, 2, B).
    std::optional<std::array<std::array<std::array<std::int64_t, 3>, 2>, 4>> by_exposure;

    std::int64_t total(int a) const { return n[a][0] + n[a][1] + n[a][2]; }
    std::int64_t at(int a, int y) const { return n[a][y]; }

    /// Outcome counts with exposure-B rows removed (identical to `n` when
    /// exposure is unmeasured).
    std::array<std::array<std::int64_t, 3>, 2> unique_exposure_counts() const;

    /// Counts restricted to one exposure level; requires measured exposure.
    std::array<std::array<std::int64_t, 3>, 2> exposure_slice(Exposure e) const;

    /// Rows with measured exposure contributing to `n` (all rows when measured).
    bool has_exposure() const { return by_exposure.has_value(); }

    friend bool operator==(const CellCounts&, const CellCounts&) = default;
};

CellCounts make_cells(const std::array<std::array<std::int64_t, 3>, 2>& n);

struct CountTable {
    CellCounts marginal;
    std::string stratified_by;                         ///< empty when unstratified
    std::vector<std::pair<std::string, CellCounts>> strata;  ///< sorted by level

    const CellCounts& stratum(const std::string& level) const;
    std::vector<std::string> levels() const;

    friend bool operator==(const CountTable&, const CountTable&) = default;
};

// ---------------------------------------------------------------------------
// Validation

enum class ValidationRule { UniqueExposure, ExposureNecessity, NoCrossInfectivity };

std::string to_string(ValidationRule r);

struct AssumptionChecks {
    bool unique_exposure = true;
    bool exposure_necessity = true;
    bool no_cross_infectivity = true;

    static AssumptionChecks all() { return {}; }
};

struct Violation {
    ValidationRule rule;
    std::size_t line;   ///< source line, or 1-based record index when generated
    std::string detail;
};

struct ValidationReport {
    std::vector<Violation> violations;
    std::map<std::string, std::size_t> counts;  ///< per rule id, zero entries included
    bool exposure_measured = false;

    bool clean() const { return violations.empty(); }
    std::size_t count(ValidationRule r) const;
    nlohmann::json to_json() const;
};

// ---------------------------------------------------------------------------
// Operations

std::vector<SubjectRecord> ingest_time_fixed(const std::string& path,
                                             const std::optional<MarkDichotomizationConfig>& config = {});
std::vector<SubjectRecord> ingest_time_fixed(std::istream& in,
                                             const std::optional<MarkDichotomizationConfig>& config = {});

std::vector<EventRecord> ingest_time_to_event(const std::string& path);
std::vector<EventRecord> ingest_time_to_event(std::istream& in);

/// Applies the threshold rule to infected records (y != 0); requires a distance.
std::vector<SubjectRecord> dichotomize(std::vector<SubjectRecord> records, double threshold);

ValidationReport validate(std::span<const SubjectRecord> records,
                          const AssumptionChecks& checks = AssumptionChecks::all());

CountTable tabulate(std::span<const SubjectRecord> records,
                    const std::optional<std::string>& stratify_by = {});

/// Tabulate a subset given by indices (used by resampling; repeats allowed).
CountTable tabulate_indexed(std::span<const SubjectRecord> records, std::span<const std::size_t> index,
                            const std::optional<std::string>& stratify_by = {});

/// Expand a CountTable into one record per counted subject (marginal or
/// per-stratum counts, exposure slices when present).
std::vector<SubjectRecord> expand_counts(const CountTable& table);

void write_time_fixed_csv(std::ostream& out, std::span<const SubjectRecord> records);
void write_time_to_event_csv(std::ostream& out, std::span<const EventRecord> records);

/// Collapse time-to-event records into time-fixed outcomes (any event by K).
std::vector<SubjectRecord> collapse_to_time_fixed(std::span<const EventRecord> events);

nlohmann::json to_json(const CellCounts& c);
nlohmann::json to_json(const CountTable& t);

}  // namespace sievekit
