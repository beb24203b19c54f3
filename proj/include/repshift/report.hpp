#pragma once

// Per-run measurement: one object owns the snapshots h_0..h_N of a single
// (width, seed) run and evaluates grid cells (t, k, Δt), caching the pieces
// that many cells share (layer cushions, contraction, λ_t, probe results).
//
// A RunMetrics instance is not thread-safe; independent runs get their own
// instance and can be evaluated in parallel.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "repshift/metrics.hpp"

namespace repshift {

struct MeasureOptions {
    ProbeConfig probe;
    DiscrepancyOptions discrepancy;
};

/// One grid cell. Also the row type of metrics.csv.
struct BoundReport {
    int width = 0;
    std::uint64_t seed = 0;
    int t = 0;
    int k = 0;
    int dt = 0;
    double rep_size = 0.0;      // ‖R^k_t(h_t)‖
    double rep_distance = 0.0;  // d(R^k_t(h_t), R^k_t(h_{t+Δt}))
    double omega = 0.0;         // ω^{k−1}_t(Δt)
    double mu_t = 0.0;
    double c_t = 0.0;
    double lambda_t = 0.0;
    double D_hat = 0.0;
    std::string D_method;
    double U = 0.0;
    double U_inf = 0.0;
    double delta_P = 0.0;
    double align_residual = 0.0;  // ρ at layer k between W_{t+Δt} and W_t

    std::vector<std::pair<AlignmentMethod, double>> method_distances;
    bool degenerate = false;
};

class RunMetrics {
public:
    /// `models[j]` is h_j; index 0 is the initialization.
    RunMetrics(std::vector<ReluNetwork> models, const TaskSequence& seq, MeasureOptions opts,
               int width = 0, std::uint64_t seed = 0);
    static RunMetrics from_store(const CheckpointStore& store, const TaskSequence& seq,
                                 MeasureOptions opts, int width = 0);

    int num_tasks() const { return static_cast<int>(models_.size()) - 1; }
    int depth() const { return models_.front().depth(); }
    const ReluNetwork& model(int t) const;
    const TaskSequence& sequence() const { return *seq_; }
    const MeasureOptions& options() const { return opts_; }

    const CushionResult& cushion(int t);
    double contraction(int t);
    double lambda(int t);
    /// Probe of model `source` on task t's layer-k features.
    const ProbeResult& probe(int source, int t, int k);

    double delta_p(int t, int k, int dt);
    /// Full cell: every column of metrics.csv.
    BoundReport report(int t, int k, int dt);

private:
    void check_cell(int t, int k, int dt) const;

    std::vector<ReluNetwork> models_;
    const TaskSequence* seq_;
    MeasureOptions opts_;
    int width_;
    std::uint64_t seed_;
    std::map<int, CushionResult> cushion_;
    std::map<int, double> contraction_;
    std::map<int, double> lambda_;
    std::map<std::tuple<int, int, int>, ProbeResult> probes_;
};

}  // namespace repshift
