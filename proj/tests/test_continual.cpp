#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "repshift/continual.hpp"
#include "repshift/error.hpp"
#include "repshift/seeding.hpp"

using namespace repshift;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "repshift_test_continual" / name;
    fs::remove_all(p);
    return p;
}

TaskSequence stream(int n) {
    StreamConfig c;
    c.num_tasks = n;
    c.samples_per_class = 30;
    c.input_dim = 6;
    c.cluster_spread = 0.3;
    c.mean_radius = 1.0;
    c.clusters_per_class = 2;
    c.seed = 77;
    return generate_split_stream(c);
}

TrainConfig train_cfg() {
    TrainConfig c;
    c.learning_rate = 0.05;
    c.batch_size = 10;
    c.epochs = 4;
    c.seed = 99;
    return c;
}

bool same_weights(const ReluNetwork& a, const ReluNetwork& b) {
    if (a.widths != b.widths) return false;
    for (std::size_t k = 0; k < a.weights.size(); ++k) {
        if ((a.weights[k].array() != b.weights[k].array()).any()) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("run_continual snapshots every task") {
    const TaskSequence one = stream(1);
    const ReluNetwork net = init_network({6, 8, 8, 2}, 1, 1.0);
    CheckpointStore store(fresh_dir("one"), "h1", 5);
    run_continual(net, one, train_cfg(), store);
    CHECK(store.indices() == std::vector<int>{0, 1});
    CHECK(same_weights(restore(store, 0), net));

    const TaskSequence seq = stream(4);
    CheckpointStore full(fresh_dir("full"), "h1", 5);
    run_continual(net, seq, train_cfg(), full);
    CHECK(full.indices().size() == 5);
    CHECK(full.contiguous_prefix() == 4);
    for (int t = 0; t < 4; ++t) {
        const ReluNetwork a = restore(full, t), b = restore(full, t + 1);
        for (int k = 1; k <= a.depth(); ++k) CHECK(std::isfinite((b.layer(k) - a.layer(k)).norm()));
    }
}

TEST_CASE("rerun is a no-op and resume is bit-identical") {
    const TaskSequence seq = stream(5);
    const ReluNetwork net = init_network({6, 8, 8, 2}, 2, 1.0);
    const fs::path dir = fresh_dir("resume_full");
    CheckpointStore full(dir, "h", 1);
    run_continual(net, seq, train_cfg(), full);
    const auto stamp = fs::last_write_time(full.file_for(5));
    run_continual(net, seq, train_cfg(), full);
    CHECK(fs::last_write_time(full.file_for(5)) == stamp);
    CHECK(full.indices().size() == 6);

    TaskSequence head = seq;
    head.tasks.resize(3);
    CheckpointStore part(fresh_dir("resume_part"), "h", 1);
    run_continual(net, head, train_cfg(), part);
    CHECK(part.contiguous_prefix() == 3);
    CheckpointStore reopened(part.root(), "h");
    run_continual(net, seq, train_cfg(), reopened);
    for (int t = 0; t <= 5; ++t) CHECK(same_weights(restore(reopened, t), restore(full, t)));
}

TEST_CASE("restore round trip and relocation") {
    const TaskSequence seq = stream(2);
    const ReluNetwork net = init_network({6, 8, 2}, 3, 1.0);
    const fs::path dir = fresh_dir("roundtrip");
    CheckpointStore store(dir, "abc", 9);
    run_continual(net, seq, train_cfg(), store);

    const ReluNetwork mid = restore(store, 1);
    // Retrain task 1 by hand to compare against the stored copy.
    TrainConfig tc = train_cfg();
    tc.seed = mix_seed(tc.seed, 1);
    const ReluNetwork expect = train_task(net, seq.task(1), tc).network;
    CHECK(same_weights(mid, expect));

    std::mt19937_64 rng(5);
    const Matrix x = oracle::random_matrix(rng, 6, 100);
    const Matrix out_a = forward_batch(mid, x).back();
    const Matrix out_b = forward_batch(expect, x).back();
    CHECK((out_a.array() == out_b.array()).all());

    const fs::path moved = fresh_dir("roundtrip_moved");
    fs::rename(dir, moved);
    CheckpointStore again(moved);
    CHECK(again.config_hash() == "abc");
    CHECK(again.seed() == 9);
    CHECK(same_weights(restore(again, 1), mid));
    CHECK(same_weights(restore(again, 0), net));
}

TEST_CASE("store errors") {
    const TaskSequence seq = stream(2);
    const ReluNetwork net = init_network({6, 8, 2}, 4, 1.0);
    const fs::path dir = fresh_dir("errors");
    CheckpointStore store(dir, "h", 0);
    run_continual(net, seq, train_cfg(), store);

    CHECK_THROWS_AS(store.write(snapshot_weights(net, 1)), StoreError);
    CHECK_THROWS_AS(store.read(7), StoreError);
    CHECK_THROWS_AS(CheckpointStore(dir, "other"), StoreError);

    {
        std::fstream f(store.file_for(2), std::ios::in | std::ios::out | std::ios::binary);
        f.seekg(0, std::ios::end);
        const auto size = static_cast<long long>(f.tellg());
        f.seekp(size - 5);
        char c = 0;
        f.seekg(size - 5);
        f.get(c);
        f.seekp(size - 5);
        f.put(static_cast<char>(c ^ 0x40));
    }
    try {
        store.read(2);
        FAIL("expected a checksum error");
    } catch (const StoreError& e) {
        CHECK(std::string(e.what()).find("ckpt_0002.bin") != std::string::npos);
    }
    CHECK_THROWS_AS(run_continual(net, seq, train_cfg(), store), StoreError);

    const TaskSequence other_dims = stream(2);
    CheckpointStore s2(fresh_dir("dims"), "h");
    CHECK_THROWS_AS(run_continual(init_network({5, 8, 2}, 1, 1.0), other_dims, train_cfg(), s2), DimensionError);
}
