#include "sievekit/trial_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "sievekit/errors.hpp"

namespace sievekit {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    fields.push_back(std::move(field));
    for (auto& f : fields) {
        const auto first = f.find_first_not_of(" \t");
        const auto last = f.find_last_not_of(" \t");
        f = first == std::string::npos ? std::string{} : f.substr(first, last - first + 1);
    }
    return fields;
}

std::string where(std::size_t line) { return "line " + std::to_string(line) + ": "; }

int parse_int(const std::string& token, std::size_t line, const std::string& column) {
    int value = 0;
    const auto* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, value);
    if (token.empty() || ec != std::errc{} || ptr != end)
        throw ParseError(where(line) + "column '" + column + "' expects an integer, got '" + token + "'");
    return value;
}

double parse_double(const std::string& token, std::size_t line, const std::string& column) {
    try {
        std::size_t used = 0;
        const double v = std::stod(token, &used);
        if (used != token.size() || !std::isfinite(v)) throw std::invalid_argument(token);
        return v;
    } catch (const std::exception&) {
        throw ParseError(where(line) + "column '" + column + "' expects a number, got '" + token + "'");
    }
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;  // (line, fields)

    std::optional<std::size_t> column(const std::string& name) const {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) return std::nullopt;
        return static_cast<std::size_t>(it - header.begin());
    }
};

CsvTable read_csv(std::istream& in) {
    CsvTable t;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        auto fields = split_csv_line(line);
        if (t.header.empty()) {
            t.header = std::move(fields);
            std::set<std::string> seen;
            for (const auto& h : t.header) {
                if (h.empty()) throw ParseError(where(line_no) + "empty column name in header");
                if (!seen.insert(h).second) throw ParseError(where(line_no) + "duplicate column '" + h + "'");
            }
            continue;
        }
        if (fields.size() != t.header.size())
            throw ParseError(where(line_no) + "expected " + std::to_string(t.header.size()) + " fields, got " +
                             std::to_string(fields.size()));
        t.rows.emplace_back(line_no, std::move(fields));
    }
    if (t.header.empty()) throw ParseError("empty input: no header line");
    return t;
}

std::ifstream open_or_throw(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    return in;
}

std::string format_number(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    return out + "\"";
}

int exposure_index(Exposure e) { return static_cast<int>(e); }

}  // namespace

std::string to_string(Exposure e) {
    switch (e) {
        case Exposure::None: return "0";
        case Exposure::Variant1: return "1";
        case Exposure::Variant2: return "2";
        case Exposure::Both: return "B";
    }
    return "?";
}

Exposure parse_exposure(const std::string& token) {
    if (token == "0") return Exposure::None;
    if (token == "1") return Exposure::Variant1;
    if (token == "2") return Exposure::Variant2;
    if (token == "B" || token == "b") return Exposure::Both;
    throw DomainError("exposure must be one of 0, 1, 2, B; got '" + token + "'");
}

std::string to_string(ValidationRule r) {
    switch (r) {
        case ValidationRule::UniqueExposure: return "unique_exposure";
        case ValidationRule::ExposureNecessity: return "exposure_necessity";
        case ValidationRule::NoCrossInfectivity: return "no_cross_infectivity";
    }
    return "?";
}

// ---------------------------------------------------------------------------

std::array<std::array<std::int64_t, 3>, 2> CellCounts::unique_exposure_counts() const {
    auto out = n;
    if (by_exposure) {
        const auto& both = (*by_exposure)[exposure_index(Exposure::Both)];
        for (int a = 0; a < 2; ++a)
            for (int y = 0; y < 3; ++y) out[a][y] -= both[a][y];
    }
    return out;
}

std::array<std::array<std::int64_t, 3>, 2> CellCounts::exposure_slice(Exposure e) const {
    if (!by_exposure) throw DomainError("exposure slice requested but exposure is not measured");
    return (*by_exposure)[exposure_index(e)];
}

CellCounts make_cells(const std::array<std::array<std::int64_t, 3>, 2>& n) {
    CellCounts c;
    c.n = n;
    return c;
}

const CellCounts& CountTable::stratum(const std::string& level) const {
    for (const auto& [lvl, cells] : strata)
        if (lvl == level) return cells;
    throw ConfigurationError("no stratum '" + level + "' for covariate '" + stratified_by + "'");
}

std::vector<std::string> CountTable::levels() const {
    std::vector<std::string> out;
    out.reserve(strata.size());
    for (const auto& s : strata) out.push_back(s.first);
    return out;
}

std::size_t ValidationReport::count(ValidationRule r) const {
    auto it = counts.find(to_string(r));
    return it == counts.end() ? 0 : it->second;
}

nlohmann::json ValidationReport::to_json() const {
    nlohmann::json v = nlohmann::json::array();
    for (const auto& x : violations)
        v.push_back({{"rule", to_string(x.rule)}, {"line", x.line}, {"detail", x.detail}});
    return {{"violations", v}, {"counts", counts}, {"exposure_measured", exposure_measured}};
}

// ---------------------------------------------------------------------------
// Ingestion

std::vector<SubjectRecord> ingest_time_fixed(std::istream& in, const std::optional<MarkDichotomizationConfig>& config) {
    const CsvTable t = read_csv(in);
    const auto col_a = t.column("a");
    if (!col_a) throw ParseError("missing required column 'a'");
    const auto col_y = t.column("y");
    const auto col_inf = t.column("infected");
    const auto col_e = t.column("e");
    const std::string dist_name = config ? config->distance_column : std::string("d");
    const auto col_d = t.column(dist_name);

    if (!config && !col_y) throw ParseError("missing required column 'y'");
    if (config) {
        if (!std::isfinite(config->threshold)) throw DomainError("dichotomization threshold must be finite");
        if (!col_y && !col_inf) throw ParseError("missing required column 'y' or 'infected'");
        if (!col_d) throw ParseError("missing distance column '" + dist_name + "'");
    }

    std::set<std::string> reserved{"a", "y", "e", "infected", "d", dist_name};
    std::vector<std::pair<std::size_t, std::string>> covariate_cols;
    for (std::size_t i = 0; i < t.header.size(); ++i)
        if (!reserved.count(t.header[i])) covariate_cols.emplace_back(i, t.header[i]);

    std::vector<SubjectRecord> out;
    out.reserve(t.rows.size());
    for (const auto& [line, f] : t.rows) {
        SubjectRecord r;
        r.line = line;
        r.a = parse_int(f[*col_a], line, "a");
        if (r.a != 0 && r.a != 1) throw DomainError(where(line) + "treatment 'a' must be 0 or 1, got " + f[*col_a]);

        if (col_d && !f[*col_d].empty()) r.distance = parse_double(f[*col_d], line, dist_name);

        bool infected = false;
        if (config && col_inf) {
            const int inf = parse_int(f[*col_inf], line, "infected");
            if (inf != 0 && inf != 1) throw DomainError(where(line) + "'infected' must be 0 or 1");
            infected = inf == 1;
            r.y = infected ? 1 : 0;
        } else {
            r.y = parse_int(f[*col_y], line, "y");
            if (r.y < 0 || r.y > 2) throw DomainError(where(line) + "outcome 'y' must be 0, 1 or 2, got " + f[*col_y]);
            infected = r.y != 0;
        }
        if (config && infected) {
            if (!r.distance)
                throw DomainError(where(line) + "infected row has no value in distance column '" + dist_name + "'");
            r.y = *r.distance < config->threshold ? 1 : 2;
        }

        if (col_e && !f[*col_e].empty()) {
            try {
                r.e = parse_exposure(f[*col_e]);
            } catch (const DomainError& err) {
                throw DomainError(where(line) + err.what());
            }
        }
        for (const auto& [idx, name] : covariate_cols) r.l[name] = f[idx];
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<SubjectRecord> ingest_time_fixed(const std::string& path,
                                             const std::optional<MarkDichotomizationConfig>& config) {
    auto in = open_or_throw(path);
    return ingest_time_fixed(in, config);
}

std::vector<EventRecord> ingest_time_to_event(std::istream& in) {
    const CsvTable t = read_csv(in);
    const auto col_a = t.column("a");
    const auto col_t = t.column("time");
    const auto col_ev = t.column("event");
    if (!col_a) throw ParseError("missing required column 'a'");
    if (!col_t) throw ParseError("missing required column 'time'");
    if (!col_ev) throw ParseError("missing required column 'event'");

    std::vector<std::pair<std::size_t, std::string>> covariate_cols;
    for (std::size_t i = 0; i < t.header.size(); ++i)
        if (i != *col_a && i != *col_t && i != *col_ev) covariate_cols.emplace_back(i, t.header[i]);

    std::vector<EventRecord> out;
    out.reserve(t.rows.size());
    for (const auto& [line, f] : t.rows) {
        EventRecord r;
        r.line = line;
        r.a = parse_int(f[*col_a], line, "a");
        if (r.a != 0 && r.a != 1) throw DomainError(where(line) + "treatment 'a' must be 0 or 1");
        r.time = parse_int(f[*col_t], line, "time");
        if (r.time < 1) throw DomainError(where(line) + "'time' must be an interval index >= 1");
        r.event = parse_int(f[*col_ev], line, "event");
        if (r.event < 0 || r.event > 2) throw DomainError(where(line) + "'event' must be 0, 1 or 2");
        for (const auto& [idx, name] : covariate_cols) r.l[name] = f[idx];
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<EventRecord> ingest_time_to_event(const std::string& path) {
    auto in = open_or_throw(path);
    return ingest_time_to_event(in);
}

std::vector<SubjectRecord> dichotomize(std::vector<SubjectRecord> records, double threshold) {
    if (!std::isfinite(threshold)) throw DomainError("dichotomization threshold must be finite");
    for (auto& r : records) {
        if (r.y == 0) continue;
        if (!r.distance) throw DomainError("record at line " + std::to_string(r.line) + " is infected but has no distance");
        r.y = *r.distance < threshold ? 1 : 2;
    }
    return records;
}

// ---------------------------------------------------------------------------

ValidationReport validate(std::span<const SubjectRecord> records, const AssumptionChecks& checks) {
    ValidationReport report;
    for (auto r : {ValidationRule::UniqueExposure, ValidationRule::ExposureNecessity, ValidationRule::NoCrossInfectivity})
        report.counts[to_string(r)] = 0;

    auto flag = [&](ValidationRule rule, std::size_t line, std::string detail) {
        report.violations.push_back({rule, line, std::move(detail)});
        ++report.counts[to_string(rule)];
    };

    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (!r.e) continue;
        report.exposure_measured = true;
        const std::size_t line = r.line ? r.line : i + 1;
        const Exposure e = *r.e;
        if (checks.unique_exposure && e == Exposure::Both)
            flag(ValidationRule::UniqueExposure, line, "exposure to both variants recorded");
        if (checks.exposure_necessity && r.y != 0 && e == Exposure::None)
            flag(ValidationRule::ExposureNecessity, line, "infection y=" + std::to_string(r.y) + " without exposure");
        if (checks.no_cross_infectivity && r.y != 0 && (e == Exposure::Variant1 || e == Exposure::Variant2) &&
            static_cast<int>(e) != r.y)
            flag(ValidationRule::NoCrossInfectivity, line,
                 "infection y=" + std::to_string(r.y) + " after exposure e=" + to_string(e));
    }
    return report;
}

namespace {

struct Accumulator {
    std::array<std::array<std::int64_t, 3>, 2> n{};
    std::array<std::array<std::array<std::int64_t, 3>, 2>, 4> ne{};
    std::int64_t with_exposure = 0;
    std::int64_t rows = 0;

    void add(const SubjectRecord& r) {
        ++n[r.a][r.y];
        ++rows;
        if (r.e) {
            ++ne[exposure_index(*r.e)][r.a][r.y];
            ++with_exposure;
        }
    }
};

}  // namespace

CountTable tabulate_indexed(std::span<const SubjectRecord> records, std::span<const std::size_t> index,
                            const std::optional<std::string>& stratify_by) {
    Accumulator marginal;
    std::map<std::string, Accumulator> strata;
    std::set<std::string> all_levels;

    if (stratify_by) {
        for (const auto& r : records) {
            auto it = r.l.find(*stratify_by);
            if (it == r.l.end()) throw ConfigurationError("unknown covariate '" + *stratify_by + "'");
            all_levels.insert(it->second);
        }
        if (records.empty()) throw ConfigurationError("unknown covariate '" + *stratify_by + "'");
        for (const auto& lvl : all_levels) strata[lvl];
    }

    for (std::size_t idx : index) {
        const auto& r = records[idx];
        marginal.add(r);
        if (stratify_by) strata[r.l.at(*stratify_by)].add(r);
    }

    // Exposure slices are kept only when every tabulated row has a measured exposure;
    // partial measurement cannot support exposure-conditional estimators.
    bool exposure_complete = false;
    {
        bool any = false, all = true;
        for (const auto& r : records) {
            any = any || r.e.has_value();
            all = all && r.e.has_value();
        }
        exposure_complete = any && all;
    }

    auto finish = [&](const Accumulator& acc) {
        CellCounts c;
        c.n = acc.n;
        if (exposure_complete) c.by_exposure = acc.ne;
        return c;
    };

    CountTable t;
    t.marginal = finish(marginal);
    if (stratify_by) {
        t.stratified_by = *stratify_by;
        for (const auto& [lvl, acc] : strata) t.strata.emplace_back(lvl, finish(acc));
    }
    return t;
}

CountTable tabulate(std::span<const SubjectRecord> records, const std::optional<std::string>& stratify_by) {
    std::vector<std::size_t> index(records.size());
    for (std::size_t i = 0; i < index.size(); ++i) index[i] = i;
    return tabulate_indexed(records, index, stratify_by);
}

std::vector<SubjectRecord> expand_counts(const CountTable& table) {
    std::vector<SubjectRecord> out;
    auto emit = [&](const CellCounts& c, const std::optional<std::pair<std::string, std::string>>& cov) {
        for (int a = 0; a < 2; ++a) {
            for (int y = 0; y < 3; ++y) {
                if (c.by_exposure) {
                    for (int e = 0; e < 4; ++e) {
                        for (std::int64_t i = 0; i < (*c.by_exposure)[e][a][y]; ++i) {
                            SubjectRecord r;
                            r.a = a;
                            r.y = y;
                            r.e = static_cast<Exposure>(e);
                            if (cov) r.l[cov->first] = cov->second;
                            out.push_back(std::move(r));
                        }
                    }
                } else {
                    for (std::int64_t i = 0; i < c.n[a][y]; ++i) {
                        SubjectRecord r;
                        r.a = a;
                        r.y = y;
                        if (cov) r.l[cov->first] = cov->second;
                        out.push_back(std::move(r));
                    }
                }
            }
        }
    };
    if (table.stratified_by.empty()) {
        emit(table.marginal, std::nullopt);
    } else {
        for (const auto& [lvl, cells] : table.strata) emit(cells, std::make_pair(table.stratified_by, lvl));
    }
    return out;
}

void write_time_fixed_csv(std::ostream& out, std::span<const SubjectRecord> records) {
    bool has_e = false, has_d = false;
    std::set<std::string> covariates;
    for (const auto& r : records) {
        has_e = has_e || r.e.has_value();
        has_d = has_d || r.distance.has_value();
        for (const auto& [k, v] : r.l) covariates.insert(k);
    }
    out << "a,y";
    if (has_e) out << ",e";
    if (has_d) out << ",d";
    for (const auto& c : covariates) out << ',' << csv_escape(c);
    out << '\n';
    for (const auto& r : records) {
        out << r.a << ',' << r.y;
        if (has_e) out << ',' << (r.e ? to_string(*r.e) : std::string{});
        if (has_d) out << ',' << (r.distance ? format_number(*r.distance) : std::string{});
        for (const auto& c : covariates) {
            auto it = r.l.find(c);
            out << ',' << (it == r.l.end() ? std::string{} : csv_escape(it->second));
        }
        out << '\n';
    }
}

void write_time_to_event_csv(std::ostream& out, std::span<const EventRecord> records) {
    std::set<std::string> covariates;
    for (const auto& r : records)
        for (const auto& [k, v] : r.l) covariates.insert(k);
    out << "a,time,event";
    for (const auto& c : covariates) out << ',' << csv_escape(c);
    out << '\n';
    for (const auto& r : records) {
        out << r.a << ',' << r.time << ',' << r.event;
        for (const auto& c : covariates) {
            auto it = r.l.find(c);
            out << ',' << (it == r.l.end() ? std::string{} : csv_escape(it->second));
        }
        out << '\n';
    }
}

std::vector<SubjectRecord> collapse_to_time_fixed(std::span<const EventRecord> events) {
    std::vector<SubjectRecord> out;
    out.reserve(events.size());
    for (const auto& ev : events) {
        SubjectRecord r;
        r.a = ev.a;
        r.y = ev.event;
        r.l = ev.l;
        r.line = ev.line;
        out.push_back(std::move(r));
    }
    return out;
}

nlohmann::json to_json(const CellCounts& c) {
    nlohmann::json j;
    j["n"] = c.n;
    if (c.by_exposure) {
        nlohmann::json slices;
        for (int e = 0; e < 4; ++e) slices[to_string(static_cast<Exposure>(e))] = (*c.by_exposure)[e];
        j["by_exposure"] = slices;
    }
    return j;
}

nlohmann::json to_json(const CountTable& t) {
    nlohmann::json j{{"marginal", to_json(t.marginal)}};
    if (!t.stratified_by.empty()) {
        j["stratified_by"] = t.stratified_by;
        nlohmann::json s = nlohmann::json::object();
        for (const auto& [lvl, cells] : t.strata) s[lvl] = to_json(cells);
        j["strata"] = s;
    }
    return j;
}

}  // namespace sievekit
