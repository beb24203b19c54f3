#include "repshift/continual.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "repshift/error.hpp"
#include "repshift/seeding.hpp"

namespace repshift {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are written in native order and must be little-endian");

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFormat = "repshift-ckpt-v1";

std::uint32_t crc_of(const char* data, std::size_t n) {
    return static_cast<std::uint32_t>(
        crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(data), static_cast<uInt>(n)));
}

std::vector<char> row_major_bytes(const Matrix& m) {
    std::vector<char> out(static_cast<std::size_t>(m.size()) * sizeof(double));
    std::size_t off = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const double v = m(i, j);
            std::memcpy(out.data() + off, &v, sizeof v);
            off += sizeof v;
        }
    }
    return out;
}

void write_atomically(const fs::path& path, const std::string& bytes) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw StoreError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw StoreError("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string checkpoint_name(int t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "ckpt_%04d.bin", t);
    return buf;
}

}  // namespace

void write_checkpoint_file(const fs::path& path, const WeightSnapshot& snapshot) {
    json meta;
    meta["format"] = kFormat;
    meta["task_index"] = snapshot.task_index();
    meta["widths"] = snapshot.widths();
    meta["seed"] = snapshot.seed();
    meta["config_hash"] = snapshot.config_hash();

    std::string blob;
    json matrices = json::array();
    for (const Matrix& w : snapshot.weights()) {
        const std::vector<char> bytes = row_major_bytes(w);
        matrices.push_back({{"rows", w.rows()},
                            {"cols", w.cols()},
                            {"offset", blob.size()},
                            {"bytes", bytes.size()},
                            {"crc32", crc_of(bytes.data(), bytes.size())}});
        blob.append(bytes.data(), bytes.size());
    }
    meta["matrices"] = matrices;

    const std::string meta_text = meta.dump();
    json header{{"meta", meta}, {"header_crc32", crc_of(meta_text.data(), meta_text.size())}};
    write_atomically(path, header.dump() + "\n" + blob);
}

WeightSnapshot read_checkpoint_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StoreError("checkpoint " + path.string() + " cannot be opened");
    const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto newline = content.find('\n');
    auto corrupt = [&path](const std::string& why) {
        return StoreError("checkpoint " + path.string() + " is corrupt: " + why);
    };
    if (newline == std::string::npos) throw corrupt("missing header line");

    json header;
    try {
        header = json::parse(content.substr(0, newline));
    } catch (const json::exception& e) {
        throw corrupt(std::string("header does not parse (") + e.what() + ")");
    }
    try {
        const json& meta = header.at("meta");
        const std::string meta_text = meta.dump();
        if (header.at("header_crc32").get<std::uint32_t>() != crc_of(meta_text.data(), meta_text.size())) {
            throw corrupt("header checksum mismatch");
        }
        if (meta.at("format").get<std::string>() != kFormat) throw corrupt("unknown format tag");

        ReluNetwork net;
        net.widths = meta.at("widths").get<std::vector<int>>();
        const std::size_t blob_start = newline + 1;
        std::size_t expected_end = 0;
        for (const json& m : meta.at("matrices")) {
            const auto rows = m.at("rows").get<Eigen::Index>();
            const auto cols = m.at("cols").get<Eigen::Index>();
            const auto offset = m.at("offset").get<std::size_t>();
            const auto bytes = m.at("bytes").get<std::size_t>();
            if (bytes != static_cast<std::size_t>(rows * cols) * sizeof(double) ||
                blob_start + offset + bytes > content.size()) {
                throw corrupt("matrix extent out of range");
            }
            const char* data = content.data() + blob_start + offset;
            if (crc_of(data, bytes) != m.at("crc32").get<std::uint32_t>()) {
                throw corrupt("checksum mismatch in layer " + std::to_string(net.weights.size() + 1));
            }
            Matrix w(rows, cols);
            std::size_t off = 0;
            for (Eigen::Index i = 0; i < rows; ++i) {
                for (Eigen::Index j = 0; j < cols; ++j) {
                    std::memcpy(&w(i, j), data + off, sizeof(double));
                    off += sizeof(double);
                }
            }
            net.weights.push_back(std::move(w));
            expected_end = std::max(expected_end, blob_start + offset + bytes);
        }
        if (expected_end != content.size()) throw corrupt("trailing bytes after last matrix");
        net.validate();
        return WeightSnapshot(meta.at("task_index").get<int>(), std::move(net),
                              meta.at("seed").get<std::uint64_t>(),
                              meta.at("config_hash").get<std::string>());
    } catch (const json::exception& e) {
        throw corrupt(std::string("header field missing or mistyped (") + e.what() + ")");
    } catch (const DimensionError& e) {
        throw corrupt(e.what());
    } catch (const NumericalError& e) {
        throw corrupt(e.what());
    }
}

CheckpointStore::CheckpointStore(fs::path root, std::string config_hash, std::uint64_t seed)
    : root_(std::move(root)), config_hash_(std::move(config_hash)), seed_(seed) {
    fs::create_directories(root_);
    const fs::path index_path = root_ / "index.json";
    if (fs::exists(index_path)) {
        json index;
        try {
            std::ifstream in(index_path);
            index = json::parse(in);
            const auto stored_hash = index.at("config_hash").get<std::string>();
            if (config_hash_.empty()) {
                config_hash_ = stored_hash;
                seed_ = index.at("seed").get<std::uint64_t>();
            } else if (stored_hash != config_hash_) {
                throw StoreError("store " + root_.string() + " was written by config " + stored_hash +
                                 ", not " + config_hash_);
            }
            indices_ = index.at("completed").get<std::vector<int>>();
        } catch (const json::exception& e) {
            throw StoreError("store index " + index_path.string() + " is corrupt: " + e.what());
        }
        std::sort(indices_.begin(), indices_.end());
        if (std::adjacent_find(indices_.begin(), indices_.end()) != indices_.end()) {
            throw StoreError("store index " + index_path.string() + " lists a task twice");
        }
    }
    for (int t : indices_) {
        if (!fs::exists(file_for(t))) {
            throw StoreError("store " + root_.string() + " lists task " + std::to_string(t) +
                             " but " + file_for(t).filename().string() + " is missing");
        }
    }
    for (const auto& entry : fs::directory_iterator(root_)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("ckpt_", 0) != 0 || entry.path().extension() != ".bin") continue;
        const int t = std::stoi(name.substr(5, 4));
        if (!contains(t)) {
            throw StoreError("store " + root_.string() + " has unindexed checkpoint " + name);
        }
    }
}

bool CheckpointStore::contains(int t) const {
    return std::binary_search(indices_.begin(), indices_.end(), t);
}

int CheckpointStore::contiguous_prefix() const {
    int j = -1;
    for (int t : indices_) {
        if (t != j + 1) break;
        j = t;
    }
    return j;
}

fs::path CheckpointStore::file_for(int t) const { return root_ / checkpoint_name(t); }

void CheckpointStore::write(const WeightSnapshot& snapshot) {
    const int t = snapshot.task_index();
    if (t < 0) throw StoreError("snapshot task index must be >= 0");
    if (contains(t) || fs::exists(file_for(t))) {
        throw StoreError("snapshot " + std::to_string(t) + " already exists in " + root_.string() +
                         "; snapshots are write-once");
    }
    write_checkpoint_file(file_for(t), snapshot);
    indices_.insert(std::upper_bound(indices_.begin(), indices_.end(), t), t);
    save_index();
}

WeightSnapshot CheckpointStore::read(int t) const {
    if (!contains(t)) {
        throw StoreError("store " + root_.string() + " has no snapshot for task " + std::to_string(t));
    }
    WeightSnapshot snap = read_checkpoint_file(file_for(t));
    if (snap.task_index() != t) {
        throw StoreError("checkpoint " + file_for(t).string() + " is corrupt: it holds task " +
                         std::to_string(snap.task_index()));
    }
    return snap;
}

void CheckpointStore::save_index() const {
    json index{{"config_hash", config_hash_}, {"seed", seed_}, {"completed", indices_}};
    write_atomically(root_ / "index.json", index.dump(2) + "\n");
}

CheckpointStore& run_continual(const ReluNetwork& net, const TaskSequence& seq,
                               const TrainConfig& cfg, CheckpointStore& store) {
    cfg.validate();
    net.validate();
    if (seq.input_dim != net.input_dim() || seq.num_classes != net.output_dim()) {
        std::ostringstream msg;
        msg << "run_continual: task stream is " << seq.input_dim << " -> " << seq.num_classes
            << ", network is " << net.input_dim() << " -> " << net.output_dim();
        throw DimensionError(msg.str());
    }
    const int prefix = store.contiguous_prefix();
    if (static_cast<int>(store.indices().size()) != prefix + 1) {
        throw StoreError("store " + store.root().string() +
                         " is not resumable: snapshots are not a contiguous prefix");
    }
    if (prefix > seq.size()) throw StoreError("store holds more tasks than the stream");

    ReluNetwork current;
    if (prefix < 0) {
        store.write(WeightSnapshot(0, net, cfg.seed, store.config_hash()));
        current = net;
    } else {
        // Verify everything already on disk before trusting it.
        for (int t = 0; t <= prefix; ++t) {
            const WeightSnapshot snap = store.read(t);
            if (snap.widths() != net.widths) {
                throw StoreError("checkpoint " + store.file_for(t).string() +
                                 " has different layer widths than the configured network");
            }
            if (t == prefix) current = snap.network();
        }
    }
    for (int t = std::max(prefix, 0) + 1; t <= seq.size(); ++t) {
        TrainConfig task_cfg = cfg;
        task_cfg.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(t));
        current = train_task(std::move(current), seq.task(t), task_cfg).network;
        store.write(WeightSnapshot(t, current, task_cfg.seed, store.config_hash()));
    }
    return store;
}

ReluNetwork restore(const CheckpointStore& store, int t) { return store.read(t).network(); }

}  // namespace repshift
