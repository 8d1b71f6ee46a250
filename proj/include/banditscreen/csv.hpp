#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace banditscreen {

// One parsed CSV file; every row has exactly header.size() cells and
// carries its 1-based source line for diagnostics.
struct CsvTable {
    std::filesystem::path path;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
};

CsvTable read_csv(const std::filesystem::path& path);

std::string render_csv(const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows);

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Canonical numeric formatting for every CSV this project writes, so equal
// runs produce byte-identical files.
std::string format_double(double v);

// Strict full-string parse; `where` prefixes the thrown diagnostic.
double parse_double(const std::string& text, const std::string& where);

}  // namespace banditscreen
