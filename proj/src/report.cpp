#include "repshift/report.hpp"

#include "repshift/error.hpp"

namespace repshift {

RunMetrics::RunMetrics(std::vector<ReluNetwork> models, const TaskSequence& seq, MeasureOptions opts,
                       int width, std::uint64_t seed)
    : models_(std::move(models)), seq_(&seq), opts_(opts), width_(width), seed_(seed) {
    if (models_.size() < 2) throw Error("RunMetrics: need the initialization and at least one task");
    if (num_tasks() > seq.size()) {
        throw DimensionError("RunMetrics: " + std::to_string(num_tasks()) + " snapshots but only " +
                             std::to_string(seq.size()) + " tasks");
    }
    for (const ReluNetwork& m : models_) {
        if (m.widths != models_.front().widths) throw DimensionError("RunMetrics: snapshots differ in shape");
    }
}

RunMetrics RunMetrics::from_store(const CheckpointStore& store, const TaskSequence& seq, MeasureOptions opts,
                                  int width) {
    const int last = store.contiguous_prefix();
    if (last < 1) throw StoreError("store " + store.root().string() + " has no trained snapshots");
    std::vector<ReluNetwork> models;
    for (int j = 0; j <= last; ++j) models.push_back(restore(store, j));
    return RunMetrics(std::move(models), seq, opts, width, store.seed());
}

const ReluNetwork& RunMetrics::model(int t) const {
    if (t < 0 || t > num_tasks()) {
        throw StoreError("no snapshot for task " + std::to_string(t) + " (have 0.." +
                         std::to_string(num_tasks()) + ")");
    }
    return models_[static_cast<std::size_t>(t)];
}

const CushionResult& RunMetrics::cushion(int t) {
    auto it = cushion_.find(t);
    if (it == cushion_.end()) it = cushion_.emplace(t, layer_cushion(model(t), seq_->task(t))).first;
    return it->second;
}

double RunMetrics::contraction(int t) {
    auto it = contraction_.find(t);
    if (it == contraction_.end()) {
        it = contraction_.emplace(t, activation_contraction(model(t), seq_->task(t))).first;
    }
    return it->second;
}

double RunMetrics::lambda(int t) {
    auto it = lambda_.find(t);
    if (it == lambda_.end()) it = lambda_.emplace(t, lambda_ratios(models_, t).lambda).first;
    return it->second;
}

const ProbeResult& RunMetrics::probe(int source, int t, int k) {
    const auto key = std::make_tuple(source, t, k);
    auto it = probes_.find(key);
    if (it == probes_.end()) {
        const TaskDataset& data = seq_->task(t);
        it = probes_
                 .emplace(key, linear_probe(layer_features(model(source), data.inputs, k), data.class_index,
                                            data.num_classes(), opts_.probe))
                 .first;
    }
    return it->second;
}

void RunMetrics::check_cell(int t, int k, int dt) const {
    if (t < 1 || dt < 0 || t + dt > num_tasks()) {
        throw StoreError("cell (t=" + std::to_string(t) + ", dt=" + std::to_string(dt) +
                         ") needs snapshots up to " + std::to_string(t + dt) + ", have 0.." +
                         std::to_string(num_tasks()));
    }
    if (k < 1 || k > depth()) {
        throw DimensionError("layer " + std::to_string(k) + " outside 1.." + std::to_string(depth()));
    }
}

double RunMetrics::delta_p(int t, int k, int dt) {
    check_cell(t, k, dt);
    const ProbeMetric metric = opts_.probe.metric;
    return probe(t, t, k).accuracy(metric) - probe(t + dt, t, k).accuracy(metric);
}

BoundReport RunMetrics::report(int t, int k, int dt) {
    check_cell(t, k, dt);
    const TaskDataset& data = seq_->task(t);
    const ReluNetwork& base = model(t);
    const ReluNetwork& later = model(t + dt);

    BoundReport r;
    r.width = width_;
    r.seed = seed_;
    r.t = t;
    r.k = k;
    r.dt = dt;
    const RepresentationSpace a = rep_space(base, t, data, k);
    const RepresentationSpace b = rep_space(later, t + dt, data, k);
    r.rep_size = rep_size(a);
    r.rep_distance = rep_distance(a, b);
    r.omega = omega(base, later, data, k);
    r.mu_t = cushion(t).mu;
    r.c_t = contraction(t);
    r.lambda_t = lambda(t);

    const DiscrepancyResult d = discrepancy(base, later, data, k, opts_.discrepancy);
    r.D_hat = d.d_hat;
    r.D_method = to_string(d.best.method);
    r.degenerate = d.degenerate;
    for (const AlignmentResult& c : d.candidates) r.method_distances.emplace_back(c.method, c.achieved_max_distance);

    BoundComponents comp;
    comp.mu = r.mu_t;
    comp.mu_per_layer = cushion(t).per_layer;
    comp.c = r.c_t;
    comp.rep_size = r.rep_size;
    comp.omega = r.omega;
    comp.lambda = r.lambda_t;
    const UpperBound u = upper_bound_U(comp);
    r.U = u.U;
    r.U_inf = u.U_inf;
    r.delta_P = delta_p(t, k, dt);
    r.align_residual = dt == 0 ? 0.0 : alignment_residual(base.layer(k), later.layer(k));
    return r;
}

}  // namespace repshift
