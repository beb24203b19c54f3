#include "repshift/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "repshift/error.hpp"

namespace repshift {

const Matrix& ReluNetwork::layer(int k) const {
    if (k < 1 || k > depth()) {
        throw DimensionError("layer index " + std::to_string(k) + " outside 1.." +
                             std::to_string(depth()));
    }
    return weights[static_cast<std::size_t>(k - 1)];
}

void ReluNetwork::validate() const {
    if (widths.size() < 3) throw DimensionError("network: need at least two layers");
    if (weights.size() + 1 != widths.size()) {
        throw DimensionError("network: widths and weights disagree on depth");
    }
    for (std::size_t k = 0; k < weights.size(); ++k) {
        const Matrix& w = weights[k];
        if (w.rows() != widths[k + 1] || w.cols() != widths[k]) {
            std::ostringstream msg;
            msg << "network: layer " << k + 1 << " has shape " << w.rows() << "x" << w.cols()
                << ", expected " << widths[k + 1] << "x" << widths[k];
            throw DimensionError(msg.str());
        }
        if (!w.allFinite()) {
            throw NumericalError("network: layer " + std::to_string(k + 1) + " has non-finite weights");
        }
    }
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || batch_size < 1 || epochs < 0 || !(init_scale >= 0.0) ||
        !(momentum >= 0.0 && momentum < 1.0)) {
        throw ConfigError("train: invalid learning_rate/batch_size/epochs/init_scale/momentum");
    }
}

ReluNetwork init_network(const std::vector<int>& widths, std::uint64_t seed, double init_scale) {
    if (widths.size() < 3) throw DimensionError("init_network: need at least three widths");
    if (std::any_of(widths.begin(), widths.end(), [](int w) { return w < 1; })) {
        throw DimensionError("init_network: widths must be >= 1");
    }
    std::mt19937_64 rng(seed);
    ReluNetwork net;
    net.widths = widths;
    for (std::size_t k = 1; k < widths.size(); ++k) {
        const double stddev = init_scale / std::sqrt(static_cast<double>(widths[k - 1]));
        Matrix w(widths[k], widths[k - 1]);
        if (stddev > 0.0) {
            std::normal_distribution<double> gauss(0.0, stddev);
            for (Eigen::Index j = 0; j < w.cols(); ++j) {
                for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = gauss(rng);
            }
        } else {
            w.setZero();
        }
        net.weights.push_back(std::move(w));
    }
    return net;
}

ActivationTrace forward_with_activations(const ReluNetwork& net, const Vector& x) {
    if (x.size() != net.input_dim()) {
        std::ostringstream msg;
        msg << "forward: input has dimension " << x.size() << ", network expects "
            << net.input_dim();
        throw DimensionError(msg.str());
    }
    ActivationTrace trace;
    trace.layers.reserve(net.weights.size());
    Vector h = net.weights.front() * x;
    trace.layers.push_back(h);
    for (std::size_t k = 1; k < net.weights.size(); ++k) {
        h = net.weights[k] * h.cwiseMax(0.0);
        trace.layers.push_back(h);
    }
    return trace;
}

std::vector<Matrix> forward_batch(const ReluNetwork& net, const Matrix& inputs) {
    if (inputs.rows() != net.input_dim()) {
        std::ostringstream msg;
        msg << "forward: inputs have dimension " << inputs.rows() << ", network expects "
            << net.input_dim();
        throw DimensionError(msg.str());
    }
    std::vector<Matrix> out;
    out.reserve(net.weights.size());
    out.push_back(net.weights.front() * inputs);
    for (std::size_t k = 1; k < net.weights.size(); ++k) {
        out.push_back(net.weights[k] * relu(out.back()));
    }
    return out;
}

Matrix layer_features(const ReluNetwork& net, const Matrix& inputs, int k) {
    if (k < 0 || k > net.depth()) {
        throw DimensionError("layer_features: layer " + std::to_string(k) + " outside 0.." +
                             std::to_string(net.depth()));
    }
    if (inputs.rows() != net.input_dim()) throw DimensionError("layer_features: input dimension");
    if (k == 0) return inputs;
    Matrix h = net.weights.front() * inputs;
    for (int j = 2; j <= k; ++j) h = net.weights[static_cast<std::size_t>(j - 1)] * relu(h);
    return h;
}

namespace {

// Column-wise log-softmax, numerically stabilized.
Matrix log_softmax(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
        const double mx = logits.col(j).maxCoeff();
        const double lse = mx + std::log((logits.col(j).array() - mx).exp().sum());
        out.col(j) = logits.col(j).array() - lse;
    }
    return out;
}

struct LossAndGrads {
    double loss = 0.0;
    std::vector<Matrix> grads;
};

LossAndGrads backprop(const ReluNetwork& net, const Matrix& inputs, const Matrix& labels) {
    const std::vector<Matrix> pre = forward_batch(net, inputs);
    const double n = static_cast<double>(inputs.cols());
    const Matrix logp = log_softmax(pre.back());

    LossAndGrads out;
    out.loss = -(labels.array() * logp.array()).sum() / n;
    out.grads.resize(net.weights.size());

    Matrix delta = (logp.array().exp().matrix() - labels) / n;
    for (std::size_t k = net.weights.size(); k-- > 0;) {
        const Matrix below = k == 0 ? inputs : relu(pre[k - 1]);
        out.grads[k] = delta * below.transpose();
        if (k > 0) {
            delta = (net.weights[k].transpose() * delta).cwiseProduct(
                (pre[k - 1].array() > 0.0).cast<double>().matrix());
        }
    }
    return out;
}

}  // namespace

double cross_entropy_loss(const ReluNetwork& net, const Matrix& inputs, const Matrix& labels) {
    if (labels.cols() != inputs.cols() || labels.rows() != net.output_dim()) {
        throw DimensionError("cross_entropy_loss: label shape does not match network/inputs");
    }
    const Matrix logp = log_softmax(forward_batch(net, inputs).back());
    return -(labels.array() * logp.array()).sum() / static_cast<double>(inputs.cols());
}

std::vector<Matrix> loss_gradients(const ReluNetwork& net, const Matrix& inputs,
                                   const Matrix& labels) {
    if (labels.cols() != inputs.cols() || labels.rows() != net.output_dim()) {
        throw DimensionError("loss_gradients: label shape does not match network/inputs");
    }
    return backprop(net, inputs, labels).grads;
}

double accuracy(const ReluNetwork& net, const TaskDataset& data) {
    const Matrix out = forward_batch(net, data.inputs).back();
    int correct = 0;
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        Eigen::Index pred = 0;
        out.col(j).maxCoeff(&pred);
        if (pred == data.class_index[static_cast<std::size_t>(j)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(out.cols());
}

TrainResult train_task(ReluNetwork net, const TaskDataset& data, const TrainConfig& cfg) {
    cfg.validate();
    net.validate();
    if (data.size() < 1) throw Error("train_task: empty dataset");
    if (data.input_dim() != net.input_dim() || data.num_classes() != net.output_dim()) {
        std::ostringstream msg;
        msg << "train_task: dataset is " << data.input_dim() << " -> " << data.num_classes()
            << ", network is " << net.input_dim() << " -> " << net.output_dim();
        throw DimensionError(msg.str());
    }

    TrainResult result;
    result.loss_trace = Vector::Zero(cfg.epochs);
    std::vector<Matrix> velocity;
    if (cfg.momentum > 0.0) {
        for (const auto& w : net.weights) velocity.push_back(Matrix::Zero(w.rows(), w.cols()));
    }

    std::mt19937_64 rng(cfg.seed);
    std::vector<int> order(static_cast<std::size_t>(data.size()));
    const int n = data.size();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (int start = 0; start < n; start += cfg.batch_size) {
            const int stop = std::min(n, start + cfg.batch_size);
            Matrix xb(data.input_dim(), stop - start);
            Matrix yb(data.num_classes(), stop - start);
            for (int i = start; i < stop; ++i) {
                xb.col(i - start) = data.inputs.col(order[static_cast<std::size_t>(i)]);
                yb.col(i - start) = data.labels.col(order[static_cast<std::size_t>(i)]);
            }
            LossAndGrads lg = backprop(net, xb, yb);
            if (!std::isfinite(lg.loss)) {
                std::ostringstream msg;
                msg << "train_task: loss became non-finite at epoch " << epoch
                    << " (learning rate " << cfg.learning_rate << " is probably too high)";
                throw NumericalError(msg.str());
            }
            loss_sum += lg.loss * static_cast<double>(stop - start);
            for (std::size_t k = 0; k < net.weights.size(); ++k) {
                if (cfg.momentum > 0.0) {
                    velocity[k] = cfg.momentum * velocity[k] + lg.grads[k];
                    net.weights[k] -= cfg.learning_rate * velocity[k];
                } else {
                    net.weights[k] -= cfg.learning_rate * lg.grads[k];
                }
            }
        }
        result.loss_trace(epoch) = loss_sum / static_cast<double>(n);
    }
    result.network = std::move(net);
    return result;
}

WeightSnapshot::WeightSnapshot(int task_index, ReluNetwork net, std::uint64_t seed,
                               std::string config_hash)
    : task_index_(task_index),
      seed_(seed),
      config_hash_(std::move(config_hash)),
      net_(std::make_shared<const ReluNetwork>(std::move(net))) {}

WeightSnapshot snapshot_weights(const ReluNetwork& net, int task_index) {
    return WeightSnapshot(task_index, net);
}

}  // namespace repshift
