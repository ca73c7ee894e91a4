#pragma once

#include "clustre/criterion.hpp"
#include "clustre/hawkes.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace clustre::cli {

/// Malformed or invalid scenario file; the message carries file:line.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunOptions {
    std::optional<std::uint64_t> seed;
    std::size_t n_paths = 0;
    std::filesystem::path output_dir = "out";
    std::size_t moments_grid = 0;
    std::optional<std::string> contract;
    std::vector<double> lambda_grid;
    std::size_t qp_atoms = 400;
    double qp_z_max = 0.0;  ///< 0 selects the 1 - 1e-12 quantile
    std::size_t region_grid = 1000;
    std::size_t validate_paths = 20'000;
    std::size_t validate_fast_paths = 4'000;
};

struct ScenarioConfig {
    std::filesystem::path source;
    std::string sha256;  ///< of the raw file bytes
    HawkesParams hawkes;
    EconomicParams economic;
    RunOptions run;
};

/// Parses and validates a YAML scenario. Model parameters have no defaults.
[[nodiscard]] ScenarioConfig load_config(const std::filesystem::path& path);

[[nodiscard]] std::string sha256_hex(const std::string& bytes);

} // namespace clustre::cli
