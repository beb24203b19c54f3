#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "repshift/error.hpp"
#include "repshift/network.hpp"
#include "repshift/tasks.hpp"

using namespace repshift;

namespace {

TaskDataset two_blobs(int per_class, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 0.3);
    Matrix x(2, 2 * per_class);
    std::vector<int> y;
    for (int i = 0; i < 2 * per_class; ++i) {
        const int c = i % 2;
        x(0, i) = (c == 0 ? 3.0 : 0.0) + n(rng);
        x(1, i) = (c == 0 ? 0.0 : 3.0) + n(rng);
        y.push_back(c);
    }
    return make_dataset(1, x, y, 2);
}

double max_abs_diff(const ReluNetwork& a, const ReluNetwork& b) {
    double d = 0.0;
    for (std::size_t k = 0; k < a.weights.size(); ++k) d = std::max(d, (a.weights[k] - b.weights[k]).cwiseAbs().maxCoeff());
    return d;
}

}  // namespace

TEST_CASE("init_network") {
    const ReluNetwork a = init_network({2, 3, 2}, 0, 1.0);
    const ReluNetwork b = init_network({2, 3, 2}, 0, 1.0);
    CHECK(max_abs_diff(a, b) == 0.0);
    CHECK(a.depth() == 2);
    CHECK(a.layer(1).rows() == 3);
    CHECK(a.layer(1).cols() == 2);

    const ReluNetwork z = init_network({3, 4, 2}, 1, 0.0);
    for (const Matrix& w : z.weights) CHECK(w.isZero(0.0));
    const ActivationTrace tr = forward_with_activations(z, Vector::Ones(3));
    for (const Vector& h : tr.layers) CHECK(h.isZero(0.0));

    // Per-layer sample standard deviation against init_scale/√fan_in.
    const ReluNetwork s = init_network({4, 8, 8, 3}, 7, 1.0);
    for (const Matrix& w : s.weights) {
        const double mean = w.mean();
        const double sd = std::sqrt((w.array() - mean).square().sum() / static_cast<double>(w.size() - 1));
        const double expect = 1.0 / std::sqrt(static_cast<double>(w.cols()));
        CHECK(std::abs(sd - expect) <= 0.3 * expect);
    }
    CHECK_THROWS_AS(init_network({3, 2}, 0, 1.0), DimensionError);
    CHECK_THROWS_AS(init_network({3, 0, 2}, 0, 1.0), DimensionError);
}

TEST_CASE("forward_with_activations") {
    ReluNetwork net;
    net.widths = {2, 2, 1};
    Matrix w1(2, 2), w2(1, 2);
    w1 << 1, 0, 0, -1;
    w2 << 1, 1;
    net.weights = {w1, w2};
    const ActivationTrace tr = forward_with_activations(net, Vector::Ones(2));
    CHECK(tr.at(1)(0) == 1.0);
    CHECK(tr.at(1)(1) == -1.0);
    CHECK(tr.output()(0) == 1.0);

    CHECK_THROWS_AS(forward_with_activations(net, Vector::Ones(3)), DimensionError);

    std::mt19937_64 rng(41);
    const ReluNetwork r = init_network({5, 7, 6, 3}, 9, 1.3);
    for (int i = 0; i < 10; ++i) {
        const Vector x = oracle::random_matrix(rng, 5, 1).col(0);
        const ActivationTrace t = forward_with_activations(r, x);
        const std::vector<Vector> ref = oracle::forward(r, x);
        for (int k = 0; k < 3; ++k) CHECK((t.layers[static_cast<std::size_t>(k)] - ref[static_cast<std::size_t>(k)]).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("forward is positively homogeneous and batched forward agrees") {
    std::mt19937_64 rng(43);
    const ReluNetwork net = init_network({4, 6, 6, 2}, 3, 1.0);
    const Matrix x = oracle::random_matrix(rng, 4, 8);
    const std::vector<Matrix> hs = forward_batch(net, x);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    for (int i = 0; i < 8; ++i) {
        const double a = u(rng);
        const ActivationTrace base = forward_with_activations(net, x.col(i));
        const ActivationTrace scaled = forward_with_activations(net, a * x.col(i));
        for (int k = 1; k <= 3; ++k) {
            const Vector& h = base.at(k);
            CHECK((scaled.at(k) - a * h).norm() <= 1e-9 * std::max(1e-300, a * h.norm()));
            CHECK((hs[static_cast<std::size_t>(k - 1)].col(i) - h).norm() <= 1e-12 * std::max(1.0, h.norm()));
        }
    }
    CHECK((layer_features(net, x, 0) - x).norm() == 0.0);
    CHECK((layer_features(net, x, 3) - hs.back()).norm() == 0.0);
}

TEST_CASE("relu is 1-Lipschitz") {
    std::mt19937_64 rng(47);
    for (int i = 0; i < 200; ++i) {
        const Vector a = oracle::random_matrix(rng, 6, 1).col(0);
        const Vector b = oracle::random_matrix(rng, 6, 1).col(0);
        CHECK((oracle::relu(a) - oracle::relu(b)).norm() <= (a - b).norm() + 1e-15);
    }
}

TEST_CASE("loss_gradients match central finite differences") {
    std::mt19937_64 rng(53);
    const ReluNetwork net = init_network({4, 6, 5, 3}, 13, 1.0);
    const Matrix x = oracle::random_matrix(rng, 4, 12);
    std::vector<int> cls;
    for (int i = 0; i < 12; ++i) cls.push_back(i % 3);
    const TaskDataset data = make_dataset(1, x, cls, 3);
    const std::vector<Matrix> grads = loss_gradients(net, data.inputs, data.labels);
    std::uniform_int_distribution<int> layer(0, 2);
    const double h = 1e-5;
    for (int c = 0; c < 20; ++c) {
        const int k = layer(rng);
        std::uniform_int_distribution<int> ri(0, static_cast<int>(net.weights[static_cast<std::size_t>(k)].rows()) - 1);
        std::uniform_int_distribution<int> ci(0, static_cast<int>(net.weights[static_cast<std::size_t>(k)].cols()) - 1);
        const int i = ri(rng), j = ci(rng);
        ReluNetwork plus = net, minus = net;
        plus.weights[static_cast<std::size_t>(k)](i, j) += h;
        minus.weights[static_cast<std::size_t>(k)](i, j) -= h;
        const double numeric = (cross_entropy_loss(plus, data.inputs, data.labels) -
                                cross_entropy_loss(minus, data.inputs, data.labels)) / (2 * h);
        const double analytic = grads[static_cast<std::size_t>(k)](i, j);
        const double rel = std::abs(numeric - analytic) / std::max(std::abs(numeric) + std::abs(analytic), 1e-8);
        CHECK(rel <= 1e-4);
    }
}

TEST_CASE("train_task") {
    const TaskDataset data = two_blobs(100, 61);
    const ReluNetwork net = init_network({2, 16, 2}, 5, 1.0);
    TrainConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.batch_size = 20;
    cfg.seed = 1;

    SUBCASE("zero epochs") {
        cfg.epochs = 0;
        const TrainResult r = train_task(net, data, cfg);
        CHECK(r.loss_trace.size() == 0);
        CHECK(max_abs_diff(r.network, net) == 0.0);
    }
    SUBCASE("zero learning rate leaves weights bit-identical") {
        cfg.epochs = 3;
        cfg.learning_rate = 0.0;
        const TrainResult r = train_task(net, data, cfg);
        CHECK(max_abs_diff(r.network, net) == 0.0);
        CHECK(r.loss_trace.allFinite());
        cfg.learning_rate = -1.0;
        CHECK_THROWS_AS(train_task(net, data, cfg), ConfigError);
    }
    SUBCASE("separable blobs are learned") {
        cfg.epochs = 200;
        const TrainResult r = train_task(net, data, cfg);
        CHECK(r.loss_trace.size() == 200);
        CHECK(r.loss_trace.allFinite());
        CHECK(accuracy(r.network, data) >= 0.99);
        CHECK(max_abs_diff(r.network, net) > 0.0);
    }
    SUBCASE("deterministic") {
        cfg.epochs = 5;
        const TrainResult a = train_task(net, data, cfg);
        const TrainResult b = train_task(net, data, cfg);
        CHECK(max_abs_diff(a.network, b.network) == 0.0);
    }
    SUBCASE("diverging run aborts") {
        cfg.epochs = 50;
        cfg.learning_rate = 1e200;
        CHECK_THROWS_AS(train_task(init_network({2, 16, 2}, 5, 3.0), data, cfg), NumericalError);
    }
    SUBCASE("label dimension mismatch") {
        cfg.epochs = 1;
        CHECK_THROWS_AS(train_task(init_network({2, 4, 3}, 5, 1.0), data, cfg), DimensionError);
    }
}

TEST_CASE("snapshot_weights") {
    const TaskDataset data = two_blobs(20, 3);
    ReluNetwork net = init_network({2, 4, 2}, 2, 1.0);
    const WeightSnapshot snap = snapshot_weights(net, 3);
    const ReluNetwork before = snap.network();
    TrainConfig cfg;
    cfg.epochs = 3;
    net = train_task(net, data, cfg).network;
    CHECK(max_abs_diff(snap.network(), before) == 0.0);
    CHECK(max_abs_diff(snap.network(), net) > 0.0);
    CHECK(snap.task_index() == 3);

    const WeightSnapshot zero = snapshot_weights(init_network({2, 4, 2}, 2, 0.0));
    for (const Matrix& w : zero.weights()) CHECK(w.isZero(0.0));
}
