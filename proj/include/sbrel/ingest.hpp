#pragma once

// Testing-log ingestion: delimited tables in the "cycle / defect header /
// defect id / size" layout, aggregated into per-phase summaries.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sbrel/error.hpp"

namespace sbrel {

struct TestLogRecord {
    std::int64_t cycle = 1;
    std::int64_t defect_header = 0;
    std::int64_t defect_id = 0;
    std::int64_t size = 1;
    std::string severity;  // opaque, carried through untouched

    friend bool operator==(const TestLogRecord&, const TestLogRecord&) = default;
};

struct PhaseSummary {
    std::int64_t phase = 1;
    std::int64_t runs_cumulative = 0;  // N_j
    std::int64_t distinct_bugs = 0;    // n_j
    std::vector<std::int64_t> defect_ids;      // ascending
    std::vector<std::int64_t> observed_sizes;  // s_ij, aligned with defect_ids
    std::int64_t observed_total = 0;

    friend bool operator==(const PhaseSummary&, const PhaseSummary&) = default;
};

struct LogFormat {
    char delimiter = '\0';  // '\0' = detect from the header line (tab wins over comma)
};

struct ParsedLog {
    std::vector<TestLogRecord> records;
    // Every data row per cycle, defect or not. For a full per-input log this is N_j's increment.
    std::map<std::int64_t, std::int64_t> rows_per_cycle;
    std::int64_t non_defect_rows = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line, char delim) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            return out;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
}

// "Defect Header" -> "defect_header"
inline std::string normalize_column(std::string_view name) {
    std::string out;
    for (char c : trim(name)) {
        if (c == ' ' || c == '-') {
            out.push_back('_');
        } else {
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    return out;
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

}  // namespace detail

inline ParsedLog parse_test_log(std::istream& in, LogFormat format = {}) {
    ParsedLog out;
    std::string line;
    std::size_t line_no = 0;

    // header
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!detail::trim(line).empty()) {
            have_header = true;
            break;
        }
    }
    if (!have_header) throw SchemaError("cycle");

    char delim = format.delimiter;
    if (delim == '\0') delim = line.find('\t') != std::string::npos ? '\t' : ',';

    std::map<std::string, std::size_t> column;
    {
        const auto names = detail::split(line, delim);
        for (std::size_t k = 0; k < names.size(); ++k) column.emplace(detail::normalize_column(names[k]), k);
    }
    for (const char* required : {"cycle", "defect_id", "size"}) {
        if (!column.contains(required)) throw SchemaError(required);
    }
    const std::size_t c_cycle = column.at("cycle");
    const std::size_t c_id = column.at("defect_id");
    const std::size_t c_size = column.at("size");
    const auto optional_column = [&](const char* name) -> std::optional<std::size_t> {
        if (auto it = column.find(name); it != column.end()) return it->second;
        return std::nullopt;
    };
    const auto c_header = optional_column("defect_header");
    const auto c_severity = optional_column("severity");
    const std::size_t required_cells = std::max({c_cycle, c_id, c_size}) + 1;

    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split(line, delim);
        if (cells.size() < required_cells) {
            throw RowError(line_no, "expected at least " + std::to_string(required_cells) + " fields");
        }
        const auto cell = [&](std::size_t k) -> std::string_view {
            return k < cells.size() ? cells[k] : std::string_view{};
        };

        const auto cycle = detail::parse_int(cell(c_cycle));
        if (!cycle || *cycle < 1) throw RowError(line_no, "cycle must be a positive integer");
        ++out.rows_per_cycle[*cycle];

        const auto size_text = cell(c_size);
        if (size_text.empty()) {
            ++out.non_defect_rows;
            continue;
        }
        const auto size = detail::parse_int(size_text);
        if (!size || *size < 0) throw RowError(line_no, "size must be a non-negative integer");
        if (*size == 0) throw RowError(line_no, "a logged defect row must have size >= 1");
        const auto id = detail::parse_int(cell(c_id));
        if (!id) throw RowError(line_no, "defect_id must be an integer");

        TestLogRecord rec;
        rec.cycle = *cycle;
        rec.defect_id = *id;
        rec.size = *size;
        if (c_header && !cell(*c_header).empty()) {
            const auto h = detail::parse_int(cell(*c_header));
            if (!h) throw RowError(line_no, "defect_header must be an integer");
            rec.defect_header = *h;
        }
        if (c_severity) rec.severity = std::string(cell(*c_severity));
        out.records.push_back(std::move(rec));
    }
    return out;
}

// Per-cycle row counts of a full per-input log, usable as runs_per_phase.
inline std::vector<std::int64_t> runs_from_row_counts(const ParsedLog& log) {
    std::vector<std::int64_t> runs;
    std::int64_t expected = 1;
    for (const auto& [cycle, rows] : log.rows_per_cycle) {
        if (cycle != expected) {
            throw ValidationError("cycles must form a contiguous range starting at 1; missing cycle " +
                                  std::to_string(expected));
        }
        runs.push_back(rows);
        ++expected;
    }
    return runs;
}

inline std::vector<PhaseSummary> summarize_phases(std::span<const TestLogRecord> records,
                                                  std::span<const std::int64_t> runs_per_phase) {
    // (cycle -> defect_id -> summed size)
    std::map<std::int64_t, std::map<std::int64_t, std::int64_t>> grouped;
    for (const auto& r : records) grouped[r.cycle][r.defect_id] += r.size;

    const std::int64_t max_cycle = grouped.empty() ? 0 : grouped.rbegin()->first;
    if (static_cast<std::int64_t>(runs_per_phase.size()) < max_cycle) {
        throw ConfigurationError("cycle " + std::to_string(runs_per_phase.size() + 1) +
                                 " is present in the log but has no runs_per_phase entry");
    }
    if (static_cast<std::int64_t>(runs_per_phase.size()) > max_cycle) {
        throw ConfigurationError("runs_per_phase has " + std::to_string(runs_per_phase.size()) +
                                 " entries but the log only covers " + std::to_string(max_cycle) + " cycles");
    }

    std::vector<PhaseSummary> out;
    out.reserve(static_cast<std::size_t>(max_cycle));
    std::int64_t cumulative = 0;
    for (std::int64_t j = 1; j <= max_cycle; ++j) {
        const auto it = grouped.find(j);
        if (it == grouped.end()) {
            throw ValidationError("cycles must form a contiguous range starting at 1; missing cycle " +
                                  std::to_string(j));
        }
        const std::int64_t runs = runs_per_phase[static_cast<std::size_t>(j - 1)];
        if (runs <= 0) {
            throw ValidationError("cumulative runs must be strictly increasing; phase " + std::to_string(j) +
                                  " adds " + std::to_string(runs) + " runs");
        }
        cumulative += runs;

        PhaseSummary ps;
        ps.phase = j;
        ps.runs_cumulative = cumulative;
        for (const auto& [id, size] : it->second) {
            ps.defect_ids.push_back(id);
            ps.observed_sizes.push_back(size);
        }
        ps.distinct_bugs = static_cast<std::int64_t>(ps.observed_sizes.size());
        ps.observed_total = std::accumulate(ps.observed_sizes.begin(), ps.observed_sizes.end(), std::int64_t{0});
        out.push_back(std::move(ps));
    }
    return out;
}

// Checks the PhaseSummary invariants on data that did not come from summarize_phases.
inline void validate_phases(std::span<const PhaseSummary> phases) {
    if (phases.empty()) throw ValidationError("no phases");
    std::int64_t prev_runs = 0;
    for (std::size_t k = 0; k < phases.size(); ++k) {
        const auto& ps = phases[k];
        const auto label = "phase " + std::to_string(k + 1);
        if (ps.phase != static_cast<std::int64_t>(k + 1)) throw ValidationError(label + ": phases must be numbered 1..m");
        if (ps.runs_cumulative <= prev_runs) throw ValidationError(label + ": cumulative runs must be strictly increasing");
        if (ps.distinct_bugs != static_cast<std::int64_t>(ps.observed_sizes.size()))
            throw ValidationError(label + ": distinct_bugs does not match the number of sizes");
        if (!ps.defect_ids.empty() && ps.defect_ids.size() != ps.observed_sizes.size())
            throw ValidationError(label + ": defect_ids and sizes differ in length");
        if (std::any_of(ps.observed_sizes.begin(), ps.observed_sizes.end(), [](auto s) { return s < 0; }))
            throw ValidationError(label + ": negative observed size");
        if (ps.observed_total != std::accumulate(ps.observed_sizes.begin(), ps.observed_sizes.end(), std::int64_t{0}))
            throw ValidationError(label + ": observed_total is not the sum of sizes");
        prev_runs = ps.runs_cumulative;
    }
}

inline std::size_t distinct_defect_ids(std::span<const PhaseSummary> phases) {
    std::set<std::int64_t> ids;
    std::size_t anonymous = 0;
    for (const auto& ps : phases) {
        if (ps.defect_ids.empty()) {
            anonymous += ps.observed_sizes.size();
        } else {
            ids.insert(ps.defect_ids.begin(), ps.defect_ids.end());
        }
    }
    return ids.size() + anonymous;
}

// Canonical phase-summary document: one object per phase.
inline nlohmann::ordered_json phases_to_json(std::span<const PhaseSummary> phases) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& ps : phases) {
        nlohmann::ordered_json o;
        o["phase"] = ps.phase;
        o["runs_cumulative"] = ps.runs_cumulative;
        o["distinct_bugs"] = ps.distinct_bugs;
        o["defect_ids"] = ps.defect_ids;
        o["sizes"] = ps.observed_sizes;
        arr.push_back(std::move(o));
    }
    return arr;
}

inline std::vector<PhaseSummary> phases_from_json(const nlohmann::ordered_json& doc) {
    const auto& arr = doc.is_object() && doc.contains("phases") ? doc.at("phases") : doc;
    if (!arr.is_array()) throw ValidationError("phase summary document must be an array of phases");
    std::vector<PhaseSummary> out;
    try {
        for (const auto& o : arr) {
            PhaseSummary ps;
            ps.phase = o.at("phase").get<std::int64_t>();
            ps.runs_cumulative = o.at("runs_cumulative").get<std::int64_t>();
            ps.observed_sizes = o.at("sizes").get<std::vector<std::int64_t>>();
            if (o.contains("defect_ids")) ps.defect_ids = o.at("defect_ids").get<std::vector<std::int64_t>>();
            ps.distinct_bugs = o.contains("distinct_bugs") ? o.at("distinct_bugs").get<std::int64_t>()
                                                           : static_cast<std::int64_t>(ps.observed_sizes.size());
            ps.observed_total = std::accumulate(ps.observed_sizes.begin(), ps.observed_sizes.end(), std::int64_t{0});
            out.push_back(std::move(ps));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed phase summary: ") + e.what());
    }
    validate_phases(out);
    return out;
}

}  // namespace sbrel
