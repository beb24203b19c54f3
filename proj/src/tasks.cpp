#include "repshift/tasks.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

#include "repshift/error.hpp"
#include "repshift/seeding.hpp"

namespace repshift {

const TaskDataset& TaskSequence::task(int t) const {
    if (t < 1 || t > size()) {
        throw Error("TaskSequence: task " + std::to_string(t) + " out of range 1.." +
                    std::to_string(size()));
    }
    return tasks[static_cast<std::size_t>(t - 1)];
}

void StreamConfig::validate() const {
    if (num_tasks < 1 || classes_per_task < 1 || samples_per_class < 1 || input_dim < 1 ||
        clusters_per_class < 1) {
        throw ConfigError("stream: all counts must be >= 1");
    }
    if (!(cluster_spread >= 0.0) || !(mean_radius > 0.0)) {
        throw ConfigError("stream: cluster_spread must be >= 0 and mean_radius > 0");
    }
}

TaskDataset make_dataset(int task_id, Matrix inputs, const std::vector<int>& class_index,
                         int num_classes) {
    if (inputs.cols() < 1) throw Error("dataset: no samples");
    if (static_cast<Eigen::Index>(class_index.size()) != inputs.cols()) {
        throw DimensionError("dataset: label count differs from sample count");
    }
    if (num_classes < 1) throw Error("dataset: need at least one class");
    TaskDataset d;
    d.task_id = task_id;
    d.inputs = std::move(inputs);
    d.labels = Matrix::Zero(num_classes, d.inputs.cols());
    d.class_index = class_index;
    for (std::size_t i = 0; i < class_index.size(); ++i) {
        const int c = class_index[i];
        if (c < 0 || c >= num_classes) throw Error("dataset: class index out of range");
        d.labels(c, static_cast<Eigen::Index>(i)) = 1.0;
    }
    d.class_values.resize(static_cast<std::size_t>(num_classes));
    for (int c = 0; c < num_classes; ++c) d.class_values[static_cast<std::size_t>(c)] = c;
    return d;
}

TaskSequence generate_split_stream(const StreamConfig& cfg) {
    cfg.validate();
    TaskSequence seq;
    seq.input_dim = cfg.input_dim;
    seq.num_classes = cfg.classes_per_task;
    std::vector<Vector> all_means;

    for (int t = 1; t <= cfg.num_tasks; ++t) {
        std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(t)));
        std::normal_distribution<double> gauss(0.0, 1.0);
        const int num_clusters = cfg.classes_per_task * cfg.clusters_per_class;

        std::vector<Vector> means;
        while (static_cast<int>(means.size()) < num_clusters) {
            Vector m(cfg.input_dim);
            for (auto& v : m) v = gauss(rng);
            const double len = m.norm();
            if (len == 0.0) continue;
            m *= cfg.mean_radius / len;
            const bool clash = std::any_of(all_means.begin(), all_means.end(),
                                           [&m](const Vector& o) { return (o - m).norm() == 0.0; });
            if (clash) continue;
            all_means.push_back(m);
            means.push_back(std::move(m));
        }

        const int n = cfg.classes_per_task * cfg.samples_per_class;
        Matrix inputs(cfg.input_dim, n);
        std::vector<int> classes(static_cast<std::size_t>(n));
        // Interleaved: sample i belongs to class i mod C.
        for (int i = 0; i < n; ++i) {
            const int c = i % cfg.classes_per_task;
            const int j = i / cfg.classes_per_task;
            const Vector& mean = means[static_cast<std::size_t>(c * cfg.clusters_per_class +
                                                                j % cfg.clusters_per_class)];
            for (int r = 0; r < cfg.input_dim; ++r) {
                inputs(r, i) = mean(r) + cfg.cluster_spread * gauss(rng);
            }
            classes[static_cast<std::size_t>(i)] = c;
        }
        seq.tasks.push_back(make_dataset(t, std::move(inputs), classes, cfg.classes_per_task));
    }
    return seq;
}

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

[[noreturn]] void malformed(const std::filesystem::path& path, int line, const std::string& why) {
    std::ostringstream msg;
    msg << path.string() << ":" << line << ": malformed row (" << why << ")";
    throw Error(msg.str());
}

}  // namespace

TaskDataset load_csv_dataset(const std::filesystem::path& path, int d_x) {
    if (d_x < 1) throw Error("load_csv_dataset: d_x must be >= 1");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("load_csv_dataset: cannot open " + path.string());

    std::vector<std::vector<double>> rows;
    std::vector<int> raw_labels;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view view = trim(line);
        if (view.empty() || view.front() == '#') continue;

        std::vector<std::string_view> fields;
        std::size_t start = 0;
        while (true) {
            const auto comma = view.find(',', start);
            fields.push_back(trim(view.substr(start, comma - start)));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (static_cast<int>(fields.size()) != d_x + 1) {
            malformed(path, line_no,
                      "expected " + std::to_string(d_x + 1) + " fields, got " +
                          std::to_string(fields.size()));
        }
        std::vector<double> feats(static_cast<std::size_t>(d_x));
        for (int j = 0; j < d_x; ++j) {
            const auto f = fields[static_cast<std::size_t>(j)];
            const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), feats[j]);
            if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(feats[j])) {
                malformed(path, line_no, "bad feature '" + std::string(f) + "'");
            }
        }
        int label = 0;
        const auto lf = fields.back();
        const auto [ptr, ec] = std::from_chars(lf.data(), lf.data() + lf.size(), label);
        if (ec != std::errc() || ptr != lf.data() + lf.size()) {
            malformed(path, line_no, "bad class label '" + std::string(lf) + "'");
        }
        rows.push_back(std::move(feats));
        raw_labels.push_back(label);
    }
    if (rows.empty()) throw Error("load_csv_dataset: " + path.string() + " contains no data rows");

    std::vector<int> observed = raw_labels;
    std::sort(observed.begin(), observed.end());
    observed.erase(std::unique(observed.begin(), observed.end()), observed.end());
    std::map<int, int> position;
    for (std::size_t i = 0; i < observed.size(); ++i) position[observed[i]] = static_cast<int>(i);

    Matrix inputs(d_x, static_cast<Eigen::Index>(rows.size()));
    std::vector<int> classes(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int j = 0; j < d_x; ++j) inputs(j, static_cast<Eigen::Index>(i)) = rows[i][j];
        classes[i] = position.at(raw_labels[i]);
    }
    TaskDataset d = make_dataset(0, std::move(inputs), classes, static_cast<int>(observed.size()));
    d.class_values = observed;
    return d;
}

void write_csv_dataset(const TaskDataset& data, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("write_csv_dataset: cannot open " + path.string());
    char buf[64];
    for (int i = 0; i < data.size(); ++i) {
        for (int j = 0; j < data.input_dim(); ++j) {
            const auto res =
                std::to_chars(buf, buf + sizeof buf, data.inputs(j, i), std::chars_format::general, 17);
            out.write(buf, res.ptr - buf);
            out.put(',');
        }
        const int c = data.class_index[static_cast<std::size_t>(i)];
        const int value = c < static_cast<int>(data.class_values.size())
                              ? data.class_values[static_cast<std::size_t>(c)]
                              : c;
        out << value << '\n';
    }
}

}  // namespace repshift
