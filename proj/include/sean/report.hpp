#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sean/config.hpp"
#include "sean/error.hpp"
#include "sean/trainer.hpp"

namespace sean {

inline std::string fmt_metric(const std::optional<double>& v) {
    if (!v) return "NA";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return buf;
}

inline const std::vector<std::string>& summary_columns() {
    static const std::vector<std::string> cols{"days",     "auc",           "f1",         "gini_daily",
                                               "cc_daily", "gini_cumulative", "cc_cumulative"};
    return cols;
}

inline std::vector<std::string> summary_row(const StreamSummary& s) {
    return {std::to_string(s.days), fmt_metric(s.auc),          fmt_metric(s.f1),           fmt_metric(s.gini_daily),
            fmt_metric(s.cc_daily), fmt_metric(s.gini_cumulative), fmt_metric(s.cc_cumulative)};
}

inline void write_csv_row(std::ostream& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
}

/// Config as "# key = value" lines, then one header and one data row.
inline void write_summary_csv(std::ostream& out, const RunConfig& cfg, const StreamSummary& s) {
    write_config(out, cfg, "# ");
    write_csv_row(out, summary_columns());
    write_csv_row(out, summary_row(s));
}

inline void write_daily_csv(std::ostream& out, const RunConfig& cfg, const std::vector<DailyReport>& reports) {
    write_config(out, cfg, "# ");
    write_csv_row(out, {"train_day", "test_day", "samples", "positives", "auc", "f1", "gini", "cc", "flagged"});
    for (const auto& r : reports)
        write_csv_row(out, {std::to_string(r.train_day), std::to_string(r.test_day), std::to_string(r.samples),
                            std::to_string(r.positives), fmt_metric(r.auc), fmt_metric(r.f1), fmt_metric(r.gini),
                            fmt_metric(r.cc), r.flagged ? "1" : "0"});
}

/// First line holds the resolved config, then one object per day.
inline void write_reports_jsonl(std::ostream& out, const RunConfig& cfg, const std::vector<DailyReport>& reports) {
    nlohmann::json c = nlohmann::json::object();
    for (const auto& [k, v] : config_entries(cfg)) c[k] = v;
    out << nlohmann::json{{"config", c}}.dump() << '\n';
    for (const auto& r : reports) out << r.to_json().dump() << '\n';
}

/// A parsed summary CSV: the embedded config and the metric row.
struct SummaryFile {
    std::vector<std::pair<std::string, std::string>> config;
    std::vector<std::string> columns;
    std::vector<std::string> values;

    std::string get(const std::string& col) const {
        for (std::size_t i = 0; i < columns.size() && i < values.size(); ++i)
            if (columns[i] == col) return values[i];
        throw LookupError("summary has no column '" + col + "'");
    }
};

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline SummaryFile read_summary_csv(std::istream& in) {
    SummaryFile f;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            auto eq = line.find(" = ");
            if (eq != std::string::npos) f.config.emplace_back(line.substr(2, eq - 2), line.substr(eq + 3));
            continue;
        }
        if (f.columns.empty()) {
            f.columns = split_csv(line);
        } else if (f.values.empty()) {
            f.values = split_csv(line);
        }
    }
    if (f.columns.empty() || f.values.empty()) throw ParseError("summary CSV lacks a header or a data row");
    if (f.columns.size() != f.values.size()) throw ParseError("summary CSV row width differs from header");
    return f;
}

inline SummaryFile load_summary_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return read_summary_csv(in);
}

/// Every artifact of a finished stream written into one directory.
inline void write_run_outputs(const std::filesystem::path& dir, const RunConfig& cfg, const World& world,
                              const StreamTrainer& trainer, const std::vector<DailyReport>& reports) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream out(dir / name);
        if (!out) throw IoError("cannot write " + (dir / name).string());
        return out;
    };
    const StreamSummary summary = summarize(reports);
    {
        auto out = open("config.txt");
        write_config(out, cfg);
    }
    {
        auto out = open("summary.csv");
        write_summary_csv(out, cfg, summary);
    }
    {
        auto out = open("daily.csv");
        write_daily_csv(out, cfg, reports);
    }
    {
        auto out = open("reports.jsonl");
        write_reports_jsonl(out, cfg, reports);
    }
    {
        auto out = open("impressions.tsv");
        write_config(out, cfg, "# ");
        summary.impressions.write(out, world.users);
    }
    {
        auto out = open("explorer.jsonl");
        write_config(out, cfg, "# ");
        trainer.explorer().write(out, world.users);
    }
    {
        std::ostringstream body;
        write_params(body, trainer.params());
        const std::string text = body.str();
        const auto nl = text.find('\n') + 1;
        auto out = open("params.txt");
        out << text.substr(0, nl);
        write_config(out, cfg, "# ");
        out << text.substr(nl);
    }
}

} // namespace sean
