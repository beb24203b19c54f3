#include <algorithm>
#include <cmath>
#include <sstream>

#include "repshift/error.hpp"
#include "repshift/metrics.hpp"
#include "repshift/seeding.hpp"

namespace repshift {

bool in_eval_split(int index, std::uint64_t seed, double eval_fraction) {
    const std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(index)));
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    return u < eval_fraction;
}

namespace {

struct Split {
    std::vector<int> train;
    std::vector<int> eval;
};

Matrix gather(const Matrix& m, const std::vector<int>& cols) {
    Matrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(cols[j]);
    return out;
}

double accuracy_of(const Matrix& logits, const std::vector<int>& cls, const std::vector<int>& cols) {
    if (cols.empty()) return 0.0;
    int correct = 0;
    for (std::size_t j = 0; j < cols.size(); ++j) {
        Eigen::Index pred = 0;
        logits.col(static_cast<Eigen::Index>(j)).maxCoeff(&pred);
        if (pred == cls[static_cast<std::size_t>(cols[j])]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(cols.size());
}

}  // namespace

ProbeResult linear_probe(const Matrix& features, const std::vector<int>& class_index, int num_classes,
                         const ProbeConfig& cfg) {
    const int n = static_cast<int>(features.cols());
    if (n == 0 || features.rows() == 0) throw DimensionError("linear_probe: empty feature set");
    if (static_cast<int>(class_index.size()) != n) {
        throw DimensionError("linear_probe: " + std::to_string(class_index.size()) + " labels for " +
                             std::to_string(n) + " samples");
    }
    if (cfg.iterations < 0 || !(cfg.step_scale > 0.0) || !(cfg.eval_fraction > 0.0 && cfg.eval_fraction < 1.0)) {
        throw ConfigError("linear_probe: invalid iterations/step_scale/eval_fraction");
    }
    for (int c : class_index) {
        if (c < 0 || c >= num_classes) throw DimensionError("linear_probe: class index out of range");
    }
    if (std::adjacent_find(class_index.begin(), class_index.end(), std::not_equal_to<>()) ==
        class_index.end()) {
        throw Error("linear_probe: labels contain a single class; probing accuracy is meaningless");
    }

    Split split;
    for (int i = 0; i < n; ++i) {
        (in_eval_split(i, cfg.seed, cfg.eval_fraction) ? split.eval : split.train).push_back(i);
    }
    if (split.train.empty() || split.eval.empty()) {
        throw DimensionError("linear_probe: " + std::to_string(n) +
                             " samples are too few for a train/eval split");
    }

    // Standardize with train-split statistics; constant features become 0.
    const Matrix xtr_raw = gather(features, split.train);
    const Vector mean = xtr_raw.rowwise().mean();
    const Vector sd = ((xtr_raw.colwise() - mean).array().square().rowwise().mean()).sqrt();
    Vector inv_sd(sd.size());
    for (Eigen::Index j = 0; j < sd.size(); ++j) {
        inv_sd(j) = sd(j) > 1e-12 * (1.0 + std::abs(mean(j))) ? 1.0 / sd(j) : 0.0;
    }
    auto prepare = [&](const Matrix& raw) {
        Matrix x(raw.rows() + 1, raw.cols());
        x.topRows(raw.rows()) = (raw.colwise() - mean).array().colwise() * inv_sd.array();
        x.row(raw.rows()).setOnes();
        return x;
    };
    const Matrix xtr = prepare(xtr_raw);
    const Matrix xev = prepare(gather(features, split.eval));

    const double ntr = static_cast<double>(split.train.size());
    Matrix y = Matrix::Zero(num_classes, xtr.cols());
    for (std::size_t j = 0; j < split.train.size(); ++j) {
        y(class_index[static_cast<std::size_t>(split.train[j])], static_cast<Eigen::Index>(j)) = 1.0;
    }
    // Softmax cross-entropy curvature is at most ½‖X‖₂²/n.
    const double sigma = spectral_norm(xtr);
    const double step = cfg.step_scale / (0.5 * sigma * sigma / ntr);

    ProbeResult out;
    out.classifier = Matrix::Zero(num_classes, xtr.rows());
    for (int it = 0; it < cfg.iterations; ++it) {
        Matrix p = out.classifier * xtr;
        for (Eigen::Index j = 0; j < p.cols(); ++j) {
            const double mx = p.col(j).maxCoeff();
            p.col(j) = (p.col(j).array() - mx).exp();
            p.col(j) /= p.col(j).sum();
        }
        out.classifier -= step * ((p - y) * xtr.transpose() / ntr);
    }
    out.train_accuracy = accuracy_of(out.classifier * xtr, class_index, split.train);
    out.eval_accuracy = accuracy_of(out.classifier * xev, class_index, split.eval);
    out.train_count = static_cast<int>(split.train.size());
    out.eval_count = static_cast<int>(split.eval.size());
    return out;
}

ProbeResult linear_probe(const RepresentationSpace& space, const TaskDataset& data, const ProbeConfig& cfg) {
    return linear_probe(space.features, data.class_index, data.num_classes(), cfg);
}

double probing_forgetting(const ReluNetwork& base, const ReluNetwork& later, const TaskDataset& data, int k,
                          const ProbeConfig& cfg) {
    const ProbeResult a = linear_probe(layer_features(base, data.inputs, k), data.class_index,
                                       data.num_classes(), cfg);
    const ProbeResult b = linear_probe(layer_features(later, data.inputs, k), data.class_index,
                                       data.num_classes(), cfg);
    return a.accuracy(cfg.metric) - b.accuracy(cfg.metric);
}

double probing_forgetting(const CheckpointStore& store, int t, int dt, const TaskDataset& data, int k,
                          const ProbeConfig& cfg) {
    return probing_forgetting(restore(store, t), restore(store, t + dt), data, k, cfg);
}

}  // namespace repshift
