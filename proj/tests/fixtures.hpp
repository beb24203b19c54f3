#pragma once

// A small trained run kept in memory, shared by the report and analysis tests.

#include <vector>

#include "repshift/network.hpp"
#include "repshift/seeding.hpp"
#include "repshift/tasks.hpp"

struct SmallRun {
    repshift::TaskSequence seq;
    std::vector<repshift::ReluNetwork> models;
};

inline const SmallRun& small_run() {
    static const SmallRun run = [] {
        SmallRun r;
        repshift::StreamConfig sc;
        sc.num_tasks = 6;
        sc.samples_per_class = 40;
        sc.input_dim = 6;
        sc.cluster_spread = 0.3;
        sc.mean_radius = 1.0;
        sc.clusters_per_class = 2;
        sc.seed = 1234;
        r.seq = repshift::generate_split_stream(sc);
        repshift::ReluNetwork net = repshift::init_network({6, 10, 10, 10, 2}, 77, 1.55);
        r.models.push_back(net);
        repshift::TrainConfig tc;
        tc.learning_rate = 0.02;
        tc.batch_size = 10;
        tc.epochs = 15;
        for (int t = 1; t <= r.seq.size(); ++t) {
            tc.seed = repshift::mix_seed(5, static_cast<std::uint64_t>(t));
            net = repshift::train_task(net, r.seq.task(t), tc).network;
            r.models.push_back(net);
        }
        return r;
    }();
    return run;
}
