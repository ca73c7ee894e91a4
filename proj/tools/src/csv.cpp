#include "clustre/cli/csv.hpp"

#include <fmt/format.h>

#include <fstream>
#include <stdexcept>

namespace clustre::cli {
namespace {

std::string quoted(const std::string& cell) {
    if (cell.find_first_of(",\"\n") == std::string::npos) {
        return cell;
    }
    std::string out = "\"";
    for (char ch : cell) {
        if (ch == '"') {
            out.push_back('"');
        }
        out.push_back(ch);
    }
    out.push_back('"');
    return out;
}

void write_line(std::ofstream& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i > 0) {
            out << ',';
        }
        out << quoted(cells[i]);
    }
    out << '\n';
}

} // namespace

std::string num(double x) { return fmt::format("{:.17g}", x == 0.0 ? 0.0 : x); }

void CsvTable::add(std::vector<std::string> row) {
    if (row.size() != header_.size()) {
        throw std::logic_error("CSV row width does not match the header");
    }
    rows_.push_back(std::move(row));
}

void CsvTable::write(const std::filesystem::path& path, const std::string& config_sha256) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << "# config_sha256=" << config_sha256 << '\n';
    write_line(out, header_);
    for (const auto& row : rows_) {
        write_line(out, row);
    }
    if (!out) {
        throw std::runtime_error("write failed for " + path.string());
    }
}

} // namespace clustre::cli
