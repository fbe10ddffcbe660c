#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace rankmatch::csvio {

// Strict comma-separated table with a required header row. Quoted cells
// (double-quote escaping) are supported; embedded newlines are not.
// Decimal point only, no locale handling.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Column index by name; throws InputError naming the column.
    std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);
CsvTable read_csv_string(const std::string& text, const std::string& origin);

// Numeric cell parse; empty or malformed cells throw InputError naming
// data row (1-based, header excluded) and column.
double parse_number(const CsvTable& table, std::size_t row, std::size_t col);

}  // namespace rankmatch::csvio
