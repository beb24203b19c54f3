#pragma once

// Text output shared by the commands: locale-independent number formatting,
// the provenance header line, and metrics.csv round-tripping.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "repshift/report.hpp"

namespace repshift {

/// 17 significant digits, '.' decimal point, round-trips every double.
std::string format_double(double v);
/// Empty string for a missing value.
std::string format_optional(const std::optional<double>& v);

/// "# config_hash=<hex> master_seed=<n>"
std::string provenance_line(const std::string& config_hash, std::uint64_t master_seed);

/// Writes `text` to `path` via a temporary file and rename.
void write_text_atomically(const std::filesystem::path& path, const std::string& text);

inline const std::vector<std::string> kMetricsColumns{
    "width", "seed",   "t",    "k",       "dt",      "rep_size", "rep_distance", "omega",   "mu_t",
    "c_t",   "lambda_t", "D_hat", "D_method", "U",     "U_inf",    "delta_P",      "align_residual"};

std::string metrics_csv_row(const BoundReport& r);
std::string metrics_csv(const std::vector<BoundReport>& rows, const std::string& config_hash,
                        std::uint64_t master_seed);

struct MetricsTable {
    std::string config_hash;
    std::uint64_t master_seed = 0;
    std::vector<BoundReport> rows;
};

/// Parses a metrics.csv written by metrics_csv. Errors name the line.
MetricsTable read_metrics_csv(const std::filesystem::path& path);

}  // namespace repshift
