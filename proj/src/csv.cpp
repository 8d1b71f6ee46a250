#include "banditscreen/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "banditscreen/errors.hpp"

namespace banditscreen {

namespace {

std::vector<std::string> split_line(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            cells.push_back(line.substr(start));
            return cells;
        }
        cells.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    CsvTable table;
    table.path = path;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty() && in.eof()) break;
        std::vector<std::string> cells = split_line(std::move(line));
        line.clear();
        if (table.header.empty()) {
            table.header = std::move(cells);
            continue;
        }
        if (cells.size() != table.header.size())
            throw ParseError(path.string() + ":" + std::to_string(line_number) + ": expected " +
                             std::to_string(table.header.size()) + " fields, got " +
                             std::to_string(cells.size()));
        table.rows.push_back(std::move(cells));
        table.line_numbers.push_back(line_number);
    }
    if (table.header.empty()) throw ParseError(path.string() + ": missing header row");
    return table;
}

std::string render_csv(const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows) {
    std::ostringstream buffer;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c) buffer << ',';
        buffer << header[c];
    }
    buffer << '\n';
    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw ContractError("csv row width does not match the header");
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) buffer << ',';
            buffer << row[c];
        }
        buffer << '\n';
    }
    return buffer.str();
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << render_csv(header, rows);
    if (!out) throw IoError("write failed for " + path.string());
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

double parse_double(const std::string& text, const std::string& where) {
    if (text.empty()) throw ParseError(where + ": empty numeric field");
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size())
        throw ParseError(where + ": malformed number '" + text + "'");
    return v;
}

}  // namespace banditscreen
