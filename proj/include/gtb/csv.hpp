#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "gtb/types.hpp"

namespace gtb {

/// Shortest round-trippable decimal form; keeps logs byte-stable and
/// replayable without precision loss.
inline std::string csv_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::string& header) : out_(path) {
        if (!out_) throw ConfigError("cannot open for writing: " + path);
        out_ << header << "\n";
    }

    template <typename... Fields>
    void row(const Fields&... fields) {
        bool first = true;
        ((out_ << (first ? "" : ","), first = false, write_field(fields)), ...);
        out_ << "\n";
    }

    /// Pre-joined line, written as-is.
    void raw_row(const std::string& line) { out_ << line << "\n"; }

  private:
    std::ofstream out_;

    void write_field(double v) { out_ << csv_num(v); }
    void write_field(int v) { out_ << v; }
    void write_field(int64_t v) { out_ << v; }
    void write_field(uint64_t v) { out_ << v; }
    void write_field(const std::string& v) { out_ << v; }
    void write_field(const char* v) { out_ << v; }
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;  // cells kept verbatim

    int column(const std::string& name) const;
};

/// Parses one of our own CSV files (no quoting or embedded commas).
CsvTable read_csv(const std::string& path);

}  // namespace gtb
