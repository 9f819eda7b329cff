#include "partod/csv.hpp"

#include <cerrno>
#include <cstdlib>
#include <cstring>

namespace partod::csv {

int Table::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

int Table::require_column(const std::string& name) const {
    int c = column(name);
    if (c < 0) fail(ErrorCode::Io, "missing column '" + name + "'");
    return c;
}

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == sep) {
            out.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    }
    return out;
}

Table read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Io, "cannot open '" + path + "'");
    Table table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto cells = split(line, ',');
        if (first) {
            table.header = std::move(cells);
            first = false;
        } else {
            table.rows.push_back(std::move(cells));
        }
    }
    if (first) fail(ErrorCode::Io, "empty file '" + path + "'");
    return table;
}

double parse_double(const std::string& cell, const std::string& context) {
    if (cell.empty()) fail(ErrorCode::Io, "empty numeric cell in " + context);
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(cell.c_str(), &end);
    if (errno != 0 || end == cell.c_str() || *end != '\0')
        fail(ErrorCode::Io, "bad number '" + cell + "' in " + context);
    return v;
}

long parse_long(const std::string& cell, const std::string& context) {
    if (cell.empty()) fail(ErrorCode::Io, "empty integer cell in " + context);
    errno = 0;
    char* end = nullptr;
    long v = std::strtol(cell.c_str(), &end, 10);
    if (errno != 0 || end == cell.c_str() || *end != '\0')
        fail(ErrorCode::Io, "bad integer '" + cell + "' in " + context);
    return v;
}

std::string format_double(double v) {
    char buf[40];
    // Find the shortest precision that round-trips exactly.
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

Writer::Writer(const std::string& path) : out_(path), path_(path) {
    if (!out_) fail(ErrorCode::Io, "cannot write '" + path + "'");
}

void Writer::row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out_ << ',';
        out_ << cells[i];
    }
    out_ << '\n';
}

Writer::~Writer() = default;

} // namespace partod::csv
