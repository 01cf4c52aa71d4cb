#pragma once

#include "clipadam/core.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace clipadam::harness {

// 17 significant digits: enough for an exact double round trip.
inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct SeriesRow {
    double time = 0.0;
    std::string metric;
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t replicas = 0;
};

struct SweepRow {
    std::string axis;
    double value = 0.0;
    std::string metric;
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t replicas = 0;
};

inline constexpr const char* kSeriesHeader = "time,metric,mean,stderr,replicas";
inline constexpr const char* kSweepHeader = "axis,value,metric,mean,stderr,replicas";

inline std::string series_body(const std::vector<SeriesRow>& rows) {
    std::string out = std::string(kSeriesHeader) + "\n";
    for (const auto& r : rows) {
        out += format_number(r.time) + "," + r.metric + "," + format_number(r.mean) + "," +
               format_number(r.std_error) + "," + std::to_string(r.replicas) + "\n";
    }
    return out;
}

inline std::string sweep_body(const std::vector<SweepRow>& rows) {
    std::string out = std::string(kSweepHeader) + "\n";
    for (const auto& r : rows) {
        out += r.axis + "," + format_number(r.value) + "," + r.metric + "," + format_number(r.mean) + "," +
               format_number(r.std_error) + "," + std::to_string(r.replicas) + "\n";
    }
    return out;
}

// Metadata lines are written first, each prefixed with "# ".
inline void write_csv(const std::string& path, const std::vector<std::string>& metadata, const std::string& body) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write output file '" + path + "'");
    for (const auto& line : metadata) out << "# " << line << "\n";
    out << body;
    if (!out) throw ConfigError("failed writing output file '" + path + "'");
}

struct CsvTable {
    std::vector<std::string> metadata;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        throw ConfigError("csv: no column named '" + name + "'");
    }
    bool has_column(const std::string& name) const {
        for (const auto& h : header) {
            if (h == name) return true;
        }
        return false;
    }
};

inline std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open csv '" + path + "'");
    CsvTable table;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            table.metadata.push_back(line.size() > 2 ? line.substr(2) : "");
            continue;
        }
        auto fields = split_fields(line);
        if (table.header.empty()) {
            table.header = std::move(fields);
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw ConfigError("csv '" + path + "': row has " + std::to_string(fields.size()) + " fields, header has " +
                              std::to_string(table.header.size()));
        }
        table.rows.push_back(std::move(fields));
    }
    if (table.header.empty()) throw ConfigError("csv '" + path + "' has no header");
    return table;
}

// Content of a CSV file without its "#" lines.
inline std::string csv_body(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open csv '" + path + "'");
    std::string out, line;
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] == '#') continue;
        out += line + "\n";
    }
    return out;
}

}  // namespace clipadam::harness
