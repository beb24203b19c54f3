#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "repshift/linalg.hpp"

namespace repshift {

/// One supervised task D_t. Samples are stored column-wise: inputs is
/// d_x × n, labels is d_y × n one-hot, and class_index holds the argmax of
/// each label column.
struct TaskDataset {
    int task_id = 0;
    Matrix inputs;
    Matrix labels;
    std::vector<int> class_index;
    // Original class label for each one-hot position (CSV ingestion keeps the
    // sorted set of observed labels here).
    std::vector<int> class_values;

    int size() const { return static_cast<int>(inputs.cols()); }
    int input_dim() const { return static_cast<int>(inputs.rows()); }
    int num_classes() const { return static_cast<int>(labels.rows()); }
};

struct TaskSequence {
    std::vector<TaskDataset> tasks;  // task_id 1..N in order
    int input_dim = 0;
    int num_classes = 0;

    int size() const { return static_cast<int>(tasks.size()); }
    /// Task with 1-based id t.
    const TaskDataset& task(int t) const;
};

struct StreamConfig {
    int num_tasks = 10;
    int classes_per_task = 2;
    int samples_per_class = 100;
    int input_dim = 16;
    double cluster_spread = 0.1;
    double mean_radius = 3.0;
    // Gaussian blobs per class; values > 1 make the classes a mixture that no
    // linear probe on raw inputs can separate.
    int clusters_per_class = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Split-style synthetic stream: every task has its own Gaussian clusters,
/// with means drawn uniformly on the sphere of radius mean_radius and never
/// shared across tasks. Labels are within-task class indices, so d_y is
/// classes_per_task for every task.
TaskSequence generate_split_stream(const StreamConfig& cfg);

/// Loads rows of `d_x` comma-separated features followed by an integer class
/// label. Lines starting with '#' and blank lines are skipped; LF and CRLF are
/// both accepted. Labels are one-hot over the sorted set of observed classes.
TaskDataset load_csv_dataset(const std::filesystem::path& path, int d_x);

/// Writes a dataset in the format load_csv_dataset reads, 17 significant digits.
void write_csv_dataset(const TaskDataset& data, const std::filesystem::path& path);

/// Builds a dataset from class indices, validating the one-hot invariants.
TaskDataset make_dataset(int task_id, Matrix inputs, const std::vector<int>& class_index,
                         int num_classes);

}  // namespace repshift
