#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "repshift/linalg.hpp"
#include "repshift/tasks.hpp"

namespace repshift {

/// Bias-free ReLU MLP h(x) = W^L φ(W^{L−1} ··· φ(W^1 x)).
///
/// widths has L + 1 entries (input dim first, output dim last) and
/// weights[k − 1] is the layer-k matrix of shape widths[k] × widths[k − 1].
struct ReluNetwork {
    std::vector<int> widths;
    std::vector<Matrix> weights;

    int depth() const { return static_cast<int>(weights.size()); }
    int input_dim() const { return widths.front(); }
    int output_dim() const { return widths.back(); }
    /// Layer-k weight matrix, 1-based as in W^k.
    const Matrix& layer(int k) const;
    /// Throws if shapes and widths disagree or an entry is non-finite.
    void validate() const;
};

/// Pre-activations h^1(x) .. h^L(x) of one input. ReLU is applied on entry to
/// the next layer, so h^k = W^k φ(h^{k−1}) with h^1 = W^1 x.
struct ActivationTrace {
    std::vector<Vector> layers;

    const Vector& at(int k) const { return layers.at(static_cast<std::size_t>(k - 1)); }
    const Vector& output() const { return layers.back(); }
};

struct TrainConfig {
    double learning_rate = 0.05;
    int batch_size = 20;
    int epochs = 30;
    std::uint64_t seed = 0;
    double init_scale = 1.0;
    double momentum = 0.0;

    void validate() const;
};

/// Gaussian weights with per-layer standard deviation init_scale/√fan_in.
ReluNetwork init_network(const std::vector<int>& widths, std::uint64_t seed, double init_scale);

ActivationTrace forward_with_activations(const ReluNetwork& net, const Vector& x);

/// Batched forward pass over the columns of `inputs`; element k − 1 holds the
/// widths[k] × n pre-activations of layer k.
std::vector<Matrix> forward_batch(const ReluNetwork& net, const Matrix& inputs);

/// Layer-k pre-activations for every column of `inputs`. k = 0 returns the
/// inputs themselves.
Matrix layer_features(const ReluNetwork& net, const Matrix& inputs, int k);

inline Matrix relu(const Matrix& m) { return m.cwiseMax(0.0); }

/// Mean softmax cross-entropy of the network outputs against one-hot labels.
double cross_entropy_loss(const ReluNetwork& net, const Matrix& inputs, const Matrix& labels);

/// Gradients of cross_entropy_loss w.r.t. each weight matrix (same order).
std::vector<Matrix> loss_gradients(const ReluNetwork& net, const Matrix& inputs,
                                   const Matrix& labels);

/// Fraction of columns whose output argmax equals the label argmax.
double accuracy(const ReluNetwork& net, const TaskDataset& data);

struct TrainResult {
    ReluNetwork network;
    Vector loss_trace;  // mean minibatch loss per epoch
};

/// Minibatch SGD (optional heavy-ball momentum) on softmax cross-entropy.
/// Batches are reshuffled every epoch from cfg.seed. Throws NumericalError if
/// the loss becomes non-finite.
TrainResult train_task(ReluNetwork net, const TaskDataset& data, const TrainConfig& cfg);

/// Immutable copy of a network's weights plus provenance.
class WeightSnapshot {
public:
    WeightSnapshot(int task_index, ReluNetwork net, std::uint64_t seed = 0,
                   std::string config_hash = {});

    int task_index() const { return task_index_; }
    std::uint64_t seed() const { return seed_; }
    const std::string& config_hash() const { return config_hash_; }
    const std::vector<int>& widths() const { return net_->widths; }
    const std::vector<Matrix>& weights() const { return net_->weights; }
    const ReluNetwork& network() const { return *net_; }

private:
    int task_index_;
    std::uint64_t seed_;
    std::string config_hash_;
    std::shared_ptr<const ReluNetwork> net_;
};

WeightSnapshot snapshot_weights(const ReluNetwork& net, int task_index = 0);

}  // namespace repshift
