#include <algorithm>
#include <cmath>
#include <sstream>

#include "repshift/error.hpp"
#include "repshift/metrics.hpp"

namespace repshift {

RepresentationSpace rep_space(const ReluNetwork& net, int source_model, const TaskDataset& data, int k) {
    if (k < 0 || k > net.depth()) {
        throw DimensionError("rep_space: layer " + std::to_string(k) + " outside 0.." +
                             std::to_string(net.depth()));
    }
    RepresentationSpace space;
    space.layer = k;
    space.task = data.task_id;
    space.source_model = source_model;
    space.features = layer_features(net, data.inputs, k);
    return space;
}

RepresentationSpace rep_space(const CheckpointStore& store, int source_model, const TaskDataset& data,
                              int k) {
    return rep_space(restore(store, source_model), source_model, data, k);
}

double rep_size(const RepresentationSpace& space) {
    if (space.size() == 0) throw DimensionError("rep_size: empty representation space");
    return space.features.colwise().norm().maxCoeff();
}

namespace {

void check_pairing(const RepresentationSpace& a, const RepresentationSpace& b) {
    if (a.size() != b.size() || a.dim() != b.dim()) {
        std::ostringstream msg;
        msg << "rep_distance: spaces are not paired (" << a.dim() << "x" << a.size() << " vs "
            << b.dim() << "x" << b.size() << ")";
        throw DimensionError(msg.str());
    }
    if (a.size() == 0) throw DimensionError("rep_distance: empty representation space");
}

}  // namespace

DistanceWitness rep_distance_witness(const RepresentationSpace& a, const RepresentationSpace& b) {
    check_pairing(a, b);
    const Eigen::RowVectorXd norms = (a.features - b.features).colwise().norm();
    DistanceWitness w;
    Eigen::Index idx = 0;
    w.distance = norms.maxCoeff(&idx);
    w.index = static_cast<int>(idx);
    return w;
}

double rep_distance(const RepresentationSpace& a, const RepresentationSpace& b, DistanceMode mode) {
    if (mode == DistanceMode::paired) return rep_distance_witness(a, b).distance;
    if (a.dim() != b.dim() || a.size() == 0 || b.size() == 0) {
        throw DimensionError("rep_distance: cross mode needs nonempty spaces of equal dimension");
    }
    double best = 0.0;
    for (int i = 0; i < a.size(); ++i) {
        best = std::max(best, (b.features.colwise() - a.features.col(i)).colwise().norm().maxCoeff());
    }
    return best;
}

double max_paired_distance(const Matrix& base, const Matrix& later, const Matrix& transform) {
    if (base.cols() != later.cols() || transform.cols() != later.rows() ||
        transform.rows() != base.rows()) {
        throw DimensionError("max_paired_distance: shapes do not line up");
    }
    if (base.cols() == 0) return 0.0;
    return (transform * later - base).colwise().norm().maxCoeff();
}

CushionResult layer_cushion(const ReluNetwork& net, const TaskDataset& data) {
    const std::vector<Matrix> pre = forward_batch(net, data.inputs);
    CushionResult out;
    for (int k = 1; k <= net.depth(); ++k) {
        const Matrix& w = net.layer(k);
        const double wnorm = spectral_norm(w);
        const Matrix below = k == 1 ? data.inputs : relu(pre[static_cast<std::size_t>(k - 2)]);
        const Eigen::RowVectorXd num = below.colwise().norm();
        const Eigen::RowVectorXd den = pre[static_cast<std::size_t>(k - 1)].colwise().norm();
        double mu = 0.0;
        for (Eigen::Index i = 0; i < den.size(); ++i) {
            if (den(i) < kDenominatorTol) {
                std::ostringstream msg;
                msg << "layer_cushion: ‖W^k φ(h^{k-1})‖ vanishes at layer " << k << ", sample " << i;
                throw NumericalError(msg.str());
            }
            mu = std::max(mu, wnorm * num(i) / den(i));
        }
        out.per_layer.push_back(mu);
        out.mu = std::max(out.mu, mu);
    }
    return out;
}

CushionResult layer_cushion(const CheckpointStore& store, int t, const TaskDataset& data) {
    return layer_cushion(restore(store, t), data);
}

double activation_contraction(const ReluNetwork& net, const TaskDataset& data) {
    const std::vector<Matrix> pre = forward_batch(net, data.inputs);
    double c = 1.0;
    for (int k = 2; k <= net.depth(); ++k) {
        const Matrix& h = pre[static_cast<std::size_t>(k - 2)];
        const Eigen::RowVectorXd num = h.colwise().norm();
        const Eigen::RowVectorXd den = relu(h).colwise().norm();
        for (Eigen::Index i = 0; i < den.size(); ++i) {
            if (den(i) < kDenominatorTol) {
                std::ostringstream msg;
                msg << "activation_contraction: φ(h^{k-1}) vanishes at layer " << k << ", sample " << i;
                throw NumericalError(msg.str());
            }
            c = std::max(c, num(i) / den(i));
        }
    }
    return c;
}

double activation_contraction(const CheckpointStore& store, int t, const TaskDataset& data) {
    return activation_contraction(restore(store, t), data);
}

double omega(const ReluNetwork& base, const ReluNetwork& later, const TaskDataset& data, int k) {
    if (k < 1 || k > base.depth()) {
        throw DimensionError("omega: layer " + std::to_string(k) + " outside 1.." +
                             std::to_string(base.depth()));
    }
    if (k == 1) return 0.0;
    const RepresentationSpace a = rep_space(base, 0, data, k - 1);
    const RepresentationSpace b = rep_space(later, 0, data, k - 1);
    const double size = rep_size(a);
    if (size < kDenominatorTol) {
        throw NumericalError("omega: layer " + std::to_string(k - 1) + " representation has zero size");
    }
    return rep_distance(a, b) / size;
}

double omega(const CheckpointStore& store, int t, int dt, const TaskDataset& data, int k) {
    return omega(restore(store, t), restore(store, t + dt), data, k);
}

}  // namespace repshift
