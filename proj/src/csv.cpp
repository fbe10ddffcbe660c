#include "rankmatch/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "rankmatch/errors.hpp"

namespace rankmatch::csvio {

namespace {

std::vector<std::string> split_line(const std::string& line, std::size_t line_no,
                                    const std::string& origin) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cell.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(cell);
            cell.clear();
        } else if (c != '\r') {
            cell.push_back(c);
        }
    }
    if (quoted)
        throw InputError(origin + ":" + std::to_string(line_no) + ": unterminated quote");
    cells.push_back(cell);
    return cells;
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw InputError("csv: no column named '" + name + "'");
}

CsvTable read_csv_string(const std::string& text, const std::string& origin) {
    CsvTable table;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        auto cells = split_line(line, line_no, origin);
        if (table.header.empty()) {
            table.header = std::move(cells);
            continue;
        }
        if (cells.size() != table.header.size())
            throw InputError(origin + ":" + std::to_string(line_no) + ": row has " +
                             std::to_string(cells.size()) + " cells, header has " +
                             std::to_string(table.header.size()));
        table.rows.push_back(std::move(cells));
    }
    if (table.header.empty()) throw InputError(origin + ": missing header row");
    return table;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open input file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return read_csv_string(buffer.str(), path);
}

double parse_number(const CsvTable& table, std::size_t row, std::size_t col) {
    const std::string& cell = table.rows[row][col];
    const std::string where =
        "row " + std::to_string(row + 1) + ", column '" + table.header[col] + "'";
    if (cell.empty()) throw InputError("csv: empty cell at " + where);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc() || ptr != cell.data() + cell.size())
        throw InputError("csv: non-numeric cell '" + cell + "' at " + where);
    return value;
}

}  // namespace rankmatch::csvio
