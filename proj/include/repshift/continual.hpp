#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "repshift/network.hpp"
#include "repshift/tasks.hpp"

namespace repshift {

/// Directory of write-once weight snapshots, one file per task index.
///
/// Layout: `ckpt_{t:04}.bin` per snapshot plus `index.json` listing the
/// completed indices, the config hash and the master seed. A checkpoint file
/// is one JSON header line (widths, t, seed, config hash, per-matrix byte
/// offsets and CRC32s) followed by little-endian float64 row-major blobs.
/// Files never contain absolute paths, so a store can be moved freely.
class CheckpointStore {
public:
    /// Opens `root`, creating it if needed. If an index already exists its
    /// config hash must match `config_hash` (an empty hash adopts whatever the
    /// index says).
    CheckpointStore(std::filesystem::path root, std::string config_hash = {},
                    std::uint64_t seed = 0);

    const std::filesystem::path& root() const { return root_; }
    const std::string& config_hash() const { return config_hash_; }
    std::uint64_t seed() const { return seed_; }

    const std::vector<int>& indices() const { return indices_; }
    bool contains(int t) const;
    bool empty() const { return indices_.empty(); }
    /// Largest j such that 0..j are all present, or -1.
    int contiguous_prefix() const;

    std::filesystem::path file_for(int t) const;

    /// Persists a snapshot. Throws StoreError if index t already exists.
    void write(const WeightSnapshot& snapshot);

    /// Reads and checksum-verifies snapshot t.
    WeightSnapshot read(int t) const;

private:
    void save_index() const;

    std::filesystem::path root_;
    std::string config_hash_;
    std::uint64_t seed_;
    std::vector<int> indices_;
};

/// Serializes one snapshot to `path` (atomic rename); used by the store.
void write_checkpoint_file(const std::filesystem::path& path, const WeightSnapshot& snapshot);
WeightSnapshot read_checkpoint_file(const std::filesystem::path& path);

/// Naive sequential fine-tuning over seq, snapshotting t = 0 (the given
/// initialization) and every t = 1..N. Task t trains with seed
/// mix_seed(cfg.seed, t), so a resumed run reproduces the uninterrupted one
/// bit for bit. Completed stores are left untouched.
CheckpointStore& run_continual(const ReluNetwork& net, const TaskSequence& seq,
                               const TrainConfig& cfg, CheckpointStore& store);

ReluNetwork restore(const CheckpointStore& store, int t);

}  // namespace repshift
