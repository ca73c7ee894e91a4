#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace clustre::cli {

/// Round-trip decimal text for a double ("%.17g"), so reruns are byte-identical.
[[nodiscard]] std::string num(double x);

// Writes `# config_sha256=<hash>`, then the header, then the rows.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add(std::vector<std::string> row);
    [[nodiscard]] const std::vector<std::vector<std::string>>& rows() const { return rows_; }
    void write(const std::filesystem::path& path, const std::string& config_sha256) const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

} // namespace clustre::cli
