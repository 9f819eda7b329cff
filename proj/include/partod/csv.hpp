#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "partod/common.hpp"

namespace partod::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;           // -1 if absent
    int require_column(const std::string& name) const;   // throws Io
};

/// Reads a comma-separated file with a header row. Values may not contain
/// embedded commas; surrounding whitespace is trimmed, empty cells kept.
Table read_file(const std::string& path);

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& line, char sep);

double parse_double(const std::string& cell, const std::string& context);
long parse_long(const std::string& cell, const std::string& context);

/// Shortest round-trippable decimal text for a double; deterministic across
/// runs so emitted files can be byte-compared.
std::string format_double(double v);

class Writer {
public:
    explicit Writer(const std::string& path);
    void row(const std::vector<std::string>& cells);
    ~Writer();

private:
    std::ofstream out_;
    std::string path_;
};

} // namespace partod::csv
