#pragma once

// The four commands behind the CLI. Each one reads an ExperimentConfig,
// works on the stores under output_dir/width_{m}/seed_{s}/ and writes its
// files into output_dir. Failures throw repshift::Error; the CLI turns them
// into a message and a nonzero exit.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "repshift/config.hpp"

namespace repshift {

struct CommandContext {
    ExperimentConfig config;
    std::filesystem::path output_dir;
    int jobs = 1;
    std::ostream* log = nullptr;
};

/// Uses config.output_dir unless `output` is non-empty.
CommandContext make_context(ExperimentConfig config, const std::filesystem::path& output = {}, int jobs = 1,
                            std::ostream* log = nullptr);

std::filesystem::path store_dir(const std::filesystem::path& output_dir, int width, int seed);

// Everything a single (width, seed) run needs, derived from the config.
TaskSequence run_stream(const ExperimentConfig& cfg, int seed);
ReluNetwork run_initial_network(const ExperimentConfig& cfg, int seed, int width);
TrainConfig run_train_config(const ExperimentConfig& cfg, int seed, int width);
MeasureOptions run_measure_options(const ExperimentConfig& cfg, int seed);

/// Opens an existing, complete store (snapshots 0..N). Throws StoreError if
/// the directory is missing, incomplete or was trained under another config.
CheckpointStore open_store(const CommandContext& ctx, int width, int seed);

/// Every grid cell of one run, in (t, k, dt) order.
std::vector<BoundReport> measure_run(const CommandContext& ctx, int width, int seed);

/// Runs fn(0..count−1) on up to `jobs` threads. Rethrows the exception of
/// the lowest failing index after all workers stop.
void parallel_for(int count, int jobs, const std::function<void(int)>& fn);

void cmd_train(const CommandContext& ctx);
void cmd_measure(const CommandContext& ctx);
void cmd_analyze(const CommandContext& ctx);

struct OracleCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Built-in self-tests: shrinkage minimizer, bound shape f, spectral norm
/// against SVD, rate-bound coefficient.
std::vector<OracleCheck> oracle_suite(const ExperimentConfig& cfg);

/// Writes assumption1.csv, assumption3.csv and oracle_suite.txt. Returns
/// false if any oracle check failed.
bool cmd_verify(const CommandContext& ctx);

}  // namespace repshift
