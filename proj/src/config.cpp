#include "repshift/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "repshift/error.hpp"
#include "repshift/seeding.hpp"

namespace repshift {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, ',')) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

template <class T>
bool parse_number(const std::string& s, T& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (first != last && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

std::string shortest(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string join(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "seed",
        "output",
        "run.seeds",
        "stream.N",
        "stream.classes_per_task",
        "stream.samples_per_class",
        "stream.d_x",
        "stream.cluster_spread",
        "stream.mean_radius",
        "stream.clusters_per_class",
        "network.depth",
        "network.widths",
        "network.init_scale",
        "train.learning_rate",
        "train.batch_size",
        "train.epochs",
        "train.momentum",
        "probe.iterations",
        "probe.step_scale",
        "probe.eval_fraction",
        "probe.metric",
        "discrepancy.ridge",
        "discrepancy.refine",
        "discrepancy.reweight_steps",
        "discrepancy.subgradient_steps",
        "discrepancy.subgradient_rate",
        "grid.t",
        "grid.k",
        "grid.dt",
        "analysis.metrics",
        "analysis.sweep_k",
        "verify.pairs",
        "verify.epochs",
        "verify.lr",
        "verify.f_peak",
    };
    return keys;
}

}  // namespace

ConfigFile ConfigFile::parse(const std::string& text, const std::string& origin) {
    ConfigFile cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        if (!known_keys().count(key)) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
        if (cfg.values_.count(key)) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": '" + key + "' set twice (first on line " +
                              std::to_string(cfg.lines_[key]) + ")");
        }
        cfg.values_[key] = value;
        cfg.lines_[key] = lineno;
    }
    return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

void ConfigFile::fail(const std::string& key, const std::string& why) const {
    const auto it = lines_.find(key);
    const std::string where = it == lines_.end() ? origin_ : origin_ + ":" + std::to_string(it->second);
    throw ConfigError(where + ": " + key + " " + why);
}

std::string ConfigFile::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

long long ConfigFile::get_int(const std::string& key, long long fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    long long v = 0;
    if (!parse_number(it->second, v)) fail(key, "must be an integer, got '" + it->second + "'");
    return v;
}

std::uint64_t ConfigFile::get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::uint64_t v = 0;
    if (!parse_number(it->second, v)) fail(key, "must be a non-negative integer, got '" + it->second + "'");
    return v;
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    double v = 0.0;
    if (!parse_number(it->second, v)) fail(key, "must be a number, got '" + it->second + "'");
    return v;
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    fail(key, "must be true or false, got '" + it->second + "'");
}

std::vector<int> ConfigFile::get_int_list(const std::string& key, const std::vector<int>& fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<int> out;
    for (const std::string& item : split_commas(it->second)) {
        const auto dots = item.find("..");
        int a = 0;
        int b = 0;
        if (dots == std::string::npos) {
            if (!parse_number(item, a)) fail(key, "has a non-integer entry '" + item + "'");
            out.push_back(a);
            continue;
        }
        if (!parse_number(trim(item.substr(0, dots)), a) || !parse_number(trim(item.substr(dots + 2)), b) || b < a) {
            fail(key, "has a malformed range '" + item + "'");
        }
        for (int v = a; v <= b; ++v) out.push_back(v);
    }
    return out;
}

std::vector<std::string> ConfigFile::get_string_list(const std::string& key,
                                                     const std::vector<std::string>& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : split_commas(it->second);
}

std::vector<int> ExperimentConfig::layer_widths(int m) const {
    std::vector<int> w{stream.input_dim};
    for (int i = 0; i < depth - 1; ++i) w.push_back(m);
    w.push_back(stream.classes_per_task);
    return w;
}

std::vector<int> ExperimentConfig::ks() const {
    if (!grid_k.empty()) return grid_k;
    std::vector<int> out;
    for (int k = 1; k <= depth; ++k) out.push_back(k);
    return out;
}

std::vector<int> ExperimentConfig::dts() const {
    if (!grid_dt.empty()) return grid_dt;
    const int tmax = *std::max_element(grid_t.begin(), grid_t.end());
    std::vector<int> out;
    for (int dt = 0; tmax + dt <= stream.num_tasks; ++dt) out.push_back(dt);
    return out;
}

std::vector<int> ExperimentConfig::sweep_ks() const {
    if (!sweep_k.empty()) return sweep_k;
    std::set<int> s{std::max(1, (depth + 1) / 3), std::max(1, (2 * depth + 1) / 3), depth};
    if (s.size() < 2) return ks();
    return {s.begin(), s.end()};
}

std::vector<std::pair<int, int>> ExperimentConfig::alignment_pairs() const {
    if (!verify_pairs.empty()) return verify_pairs;
    return {{1, stream.num_tasks}};
}

void ExperimentConfig::validate() const {
    stream.validate();
    train.validate();
    if (depth < 2) throw ConfigError("network.depth must be >= 2");
    if (widths.empty()) throw ConfigError("network.widths is empty");
    if (std::set<int>(widths.begin(), widths.end()).size() != widths.size()) {
        throw ConfigError("network.widths lists a width twice");
    }
    for (int w : widths) {
        if (w < 1) throw ConfigError("network.widths must be >= 1");
    }
    if (seeds.empty()) throw ConfigError("run.seeds is empty");
    if (std::set<int>(seeds.begin(), seeds.end()).size() != seeds.size()) {
        throw ConfigError("run.seeds lists a seed twice");
    }
    for (int s : seeds) {
        if (s < 0) throw ConfigError("run.seeds must be >= 0");
    }
    if (grid_t.empty()) throw ConfigError("grid.t is empty");
    for (int t : grid_t) {
        if (t < 1 || t > stream.num_tasks) throw ConfigError("grid.t entries must lie in 1..stream.N");
    }
    for (int k : ks()) {
        if (k < 1 || k > depth) throw ConfigError("grid.k entries must lie in 1..network.depth");
    }
    for (int k : sweep_ks()) {
        if (k < 1 || k > depth) throw ConfigError("analysis.sweep_k entries must lie in 1..network.depth");
    }
    const int tmax = *std::max_element(grid_t.begin(), grid_t.end());
    if (dts().empty()) throw ConfigError("grid.dt is empty");
    for (int dt : dts()) {
        if (dt < 0 || tmax + dt > stream.num_tasks) {
            throw ConfigError("grid.dt entry " + std::to_string(dt) + " needs task " + std::to_string(tmax + dt) +
                              " but stream.N is " + std::to_string(stream.num_tasks));
        }
    }
    for (const std::string& m : analysis_metrics) {
        if (m != "delta_P" && m != "D_hat" && m != "U") {
            throw ConfigError("analysis.metrics: unknown metric '" + m + "'");
        }
    }
    for (const auto& [t, tp] : alignment_pairs()) {
        if (t < 0 || tp < 0 || t > stream.num_tasks || tp > stream.num_tasks) {
            throw ConfigError("verify.pairs entries must lie in 0..stream.N");
        }
    }
    if (verify_epochs < 0 || !(verify_lr > 0.0)) throw ConfigError("verify.epochs/verify.lr out of range");
    if (measure.probe.iterations < 0 || !(measure.probe.step_scale > 0.0) ||
        !(measure.probe.eval_fraction > 0.0 && measure.probe.eval_fraction < 1.0)) {
        throw ConfigError("probe.iterations/step_scale/eval_fraction out of range");
    }
    const DiscrepancyOptions& d = measure.discrepancy;
    if (d.reweight_steps < 0 || d.subgradient_steps < 0 || !(d.subgradient_rate > 0.0)) {
        throw ConfigError("discrepancy step counts must be >= 0 and the rate > 0");
    }
}

std::string ExperimentConfig::training_text() const {
    std::vector<std::pair<std::string, std::string>> kv{
        {"seed", std::to_string(master_seed)},
        {"run.seeds", join(seeds)},
        {"stream.N", std::to_string(stream.num_tasks)},
        {"stream.classes_per_task", std::to_string(stream.classes_per_task)},
        {"stream.samples_per_class", std::to_string(stream.samples_per_class)},
        {"stream.d_x", std::to_string(stream.input_dim)},
        {"stream.cluster_spread", shortest(stream.cluster_spread)},
        {"stream.mean_radius", shortest(stream.mean_radius)},
        {"stream.clusters_per_class", std::to_string(stream.clusters_per_class)},
        {"network.depth", std::to_string(depth)},
        {"network.widths", join(widths)},
        {"network.init_scale", shortest(train.init_scale)},
        {"train.learning_rate", shortest(train.learning_rate)},
        {"train.batch_size", std::to_string(train.batch_size)},
        {"train.epochs", std::to_string(train.epochs)},
        {"train.momentum", shortest(train.momentum)},
    };
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
}

std::string ExperimentConfig::canonical_text() const {
    std::vector<std::pair<std::string, std::string>> kv{
        {"probe.iterations", std::to_string(measure.probe.iterations)},
        {"probe.step_scale", shortest(measure.probe.step_scale)},
        {"probe.eval_fraction", shortest(measure.probe.eval_fraction)},
        {"probe.metric", measure.probe.metric == ProbeMetric::train ? "train" : "eval"},
        {"discrepancy.ridge", shortest(measure.discrepancy.ridge)},
        {"discrepancy.refine", measure.discrepancy.refine ? "true" : "false"},
        {"discrepancy.reweight_steps", std::to_string(measure.discrepancy.reweight_steps)},
        {"discrepancy.subgradient_steps", std::to_string(measure.discrepancy.subgradient_steps)},
        {"discrepancy.subgradient_rate", shortest(measure.discrepancy.subgradient_rate)},
        {"grid.t", join(grid_t)},
        {"grid.k", join(ks())},
        {"grid.dt", join(dts())},
        {"analysis.sweep_k", join(sweep_ks())},
        {"verify.epochs", std::to_string(verify_epochs)},
        {"verify.lr", shortest(verify_lr)},
        {"verify.f_peak", shortest(verify_f_peak)},
    };
    std::string metrics;
    for (const std::string& m : analysis_metrics) metrics += (metrics.empty() ? "" : ",") + m;
    kv.emplace_back("analysis.metrics", metrics);
    std::string pairs;
    for (const auto& [a, b] : alignment_pairs()) {
        pairs += (pairs.empty() ? "" : ",") + std::to_string(a) + ":" + std::to_string(b);
    }
    kv.emplace_back("verify.pairs", pairs);
    std::string out = training_text();
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
}

ExperimentConfig make_experiment_config(const ConfigFile& f, std::optional<std::uint64_t> seed_override) {
    ExperimentConfig c;
    c.master_seed = seed_override ? *seed_override : f.get_u64("seed", 0);
    c.output_dir = f.get_string("output", c.output_dir.string());
    c.seeds = f.get_int_list("run.seeds", c.seeds);

    c.stream.num_tasks = static_cast<int>(f.get_int("stream.N", 10));
    c.stream.classes_per_task = static_cast<int>(f.get_int("stream.classes_per_task", 2));
    c.stream.samples_per_class = static_cast<int>(f.get_int("stream.samples_per_class", 250));
    c.stream.input_dim = static_cast<int>(f.get_int("stream.d_x", 16));
    c.stream.cluster_spread = f.get_double("stream.cluster_spread", 0.33);
    c.stream.mean_radius = f.get_double("stream.mean_radius", 1.0);
    c.stream.clusters_per_class = static_cast<int>(f.get_int("stream.clusters_per_class", 2));

    c.depth = static_cast<int>(f.get_int("network.depth", 9));
    c.widths = f.get_int_list("network.widths", c.widths);
    c.train.init_scale = f.get_double("network.init_scale", 1.55);
    c.train.learning_rate = f.get_double("train.learning_rate", 0.02);
    c.train.batch_size = static_cast<int>(f.get_int("train.batch_size", 20));
    c.train.epochs = static_cast<int>(f.get_int("train.epochs", 50));
    c.train.momentum = f.get_double("train.momentum", 0.0);

    ProbeConfig& p = c.measure.probe;
    p.iterations = static_cast<int>(f.get_int("probe.iterations", 300));
    p.step_scale = f.get_double("probe.step_scale", 1.0);
    p.eval_fraction = f.get_double("probe.eval_fraction", 0.2);
    const std::string metric = f.get_string("probe.metric", "eval");
    if (metric == "eval") p.metric = ProbeMetric::eval;
    else if (metric == "train") p.metric = ProbeMetric::train;
    else throw ConfigError("probe.metric must be 'train' or 'eval', got '" + metric + "'");

    DiscrepancyOptions& d = c.measure.discrepancy;
    d.ridge = f.get_double("discrepancy.ridge", -1.0);
    d.refine = f.get_bool("discrepancy.refine", true);
    d.reweight_steps = static_cast<int>(f.get_int("discrepancy.reweight_steps", d.reweight_steps));
    d.subgradient_steps = static_cast<int>(f.get_int("discrepancy.subgradient_steps", d.subgradient_steps));
    d.subgradient_rate = f.get_double("discrepancy.subgradient_rate", d.subgradient_rate);

    c.grid_t = f.get_int_list("grid.t", c.grid_t);
    c.grid_k = f.get_int_list("grid.k", {});
    if (f.get_string("grid.dt", "all") != "all") c.grid_dt = f.get_int_list("grid.dt", {});

    c.analysis_metrics = f.get_string_list("analysis.metrics", c.analysis_metrics);
    c.sweep_k = f.get_int_list("analysis.sweep_k", {});

    for (const std::string& pair : f.get_string_list("verify.pairs", {})) {
        const auto colon = pair.find(':');
        int a = 0;
        int b = 0;
        if (colon == std::string::npos || !parse_number(trim(pair.substr(0, colon)), a) ||
            !parse_number(trim(pair.substr(colon + 1)), b)) {
            throw ConfigError("verify.pairs entries look like 't:t_prime', got '" + pair + "'");
        }
        c.verify_pairs.emplace_back(a, b);
    }
    c.verify_epochs = static_cast<int>(f.get_int("verify.epochs", c.verify_epochs));
    c.verify_lr = f.get_double("verify.lr", c.verify_lr);
    c.verify_f_peak = f.get_double("verify.f_peak", kBoundShapePeak);

    c.validate();
    c.train_hash = fnv1a_hex(c.training_text());
    c.hash = fnv1a_hex(c.canonical_text());
    return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        std::optional<std::uint64_t> seed_override) {
    return make_experiment_config(ConfigFile::load(path), seed_override);
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::uint64_t run_base_seed(std::uint64_t master, int s) { return mix_seed(master, static_cast<std::uint64_t>(s)); }

std::uint64_t stream_seed(std::uint64_t master, int s) { return mix_seed(run_base_seed(master, s), kStreamTag); }

std::uint64_t train_seed(std::uint64_t master, int s, int width) {
    return mix_seed(run_base_seed(master, s), static_cast<std::uint64_t>(width));
}

std::uint64_t init_seed(std::uint64_t master, int s, int width) {
    return mix_seed(train_seed(master, s, width), kInitTag);
}

std::uint64_t probe_seed(std::uint64_t master, int s) { return mix_seed(run_base_seed(master, s), kProbeTag); }

}  // namespace repshift
