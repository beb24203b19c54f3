#pragma once

// Experiment configuration: a flat text file of `section.key = value` lines
// with '#' comments. Unknown keys are rejected so typos fail loudly. Keys
// and defaults are listed in configs/README.md.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "repshift/continual.hpp"
#include "repshift/metrics.hpp"
#include "repshift/report.hpp"
#include "repshift/tasks.hpp"

namespace repshift {

/// Raw key/value view of a config file, with typed accessors.
class ConfigFile {
public:
    static ConfigFile parse(const std::string& text, const std::string& origin = "<config>");
    static ConfigFile load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::map<std::string, std::string>& values() const { return values_; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    /// Comma-separated integers; `a..b` expands to the inclusive range.
    std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;
    std::vector<std::string> get_string_list(const std::string& key,
                                             const std::vector<std::string>& fallback) const;

private:
    [[noreturn]] void fail(const std::string& key, const std::string& why) const;

    std::string origin_;
    std::map<std::string, std::string> values_;
    std::map<std::string, int> lines_;
};

struct ExperimentConfig {
    StreamConfig stream;
    int depth = 9;
    std::vector<int> widths{16, 32, 64};
    TrainConfig train;
    std::vector<int> seeds{0, 1, 2, 3, 4};
    std::uint64_t master_seed = 0;

    MeasureOptions measure;
    std::vector<int> grid_t{1};
    std::vector<int> grid_k;   // empty: 1..depth
    std::vector<int> grid_dt;  // empty: 0..N − max t

    std::vector<std::string> analysis_metrics{"delta_P", "D_hat", "U"};
    std::vector<int> sweep_k;  // empty: every third layer ending at L

    std::vector<std::pair<int, int>> verify_pairs;  // empty: (1, N)
    int verify_epochs = 100;
    double verify_lr = 1e-3;
    /// Reference value the oracle suite checks the peak of f against.
    double verify_f_peak = kBoundShapePeak;

    std::filesystem::path output_dir = "runs/desk";
    std::string hash;        // every result-affecting setting
    std::string train_hash;  // settings that shape the checkpoint stores

    /// Widths of the network for hidden width m: d_x, m × (L − 1), d_y.
    std::vector<int> layer_widths(int m) const;
    std::vector<int> ks() const;
    std::vector<int> dts() const;
    std::vector<int> sweep_ks() const;
    std::vector<std::pair<int, int>> alignment_pairs() const;

    void validate() const;
    /// Stream, network, training and seed settings in a fixed order.
    std::string training_text() const;
    /// training_text() plus measurement, grid, analysis and verify settings.
    /// The output directory is not part of either.
    std::string canonical_text() const;
};

/// Parses and validates. `seed_override` (e.g. from REPSHIFT_SEED) replaces
/// the master seed before hashing.
ExperimentConfig make_experiment_config(const ConfigFile& file,
                                        std::optional<std::uint64_t> seed_override = std::nullopt);
ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        std::optional<std::uint64_t> seed_override = std::nullopt);

/// FNV-1a, 64-bit, as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& text);

// Per-run seed derivation. The task stream depends only on (master, s), so
// every width within a seed sees the same tasks.
std::uint64_t run_base_seed(std::uint64_t master, int s);
std::uint64_t stream_seed(std::uint64_t master, int s);
std::uint64_t train_seed(std::uint64_t master, int s, int width);
std::uint64_t init_seed(std::uint64_t master, int s, int width);
std::uint64_t probe_seed(std::uint64_t master, int s);

}  // namespace repshift
