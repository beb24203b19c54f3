// End-to-end runs of the repshift binary on the minimal config.

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "repshift/config.hpp"
#include "repshift/experiment.hpp"
#include "repshift/io.hpp"

using namespace repshift;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "repshift_cli";

struct Run {
    int code = 0;
    std::string output;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Run run_cli(const std::string& args, const std::string& env = "") {
    const fs::path log = kRoot / "last.log";
    const std::string cmd = env + " " + std::string(REPSHIFT_BIN) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.output = slurp(log);
    return r;
}

// The minimal config with `overrides` replacing (or adding) keys.
fs::path config_with(const std::string& name, const std::map<std::string, std::string>& overrides) {
    std::istringstream in(slurp(fs::path(CONFIG_DIR) / "minimal.conf"));
    std::string text, line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        std::string key = eq == std::string::npos ? "" : line.substr(0, eq);
        while (!key.empty() && key.back() == ' ') key.pop_back();
        if (!overrides.count(key)) text += line + "\n";
    }
    for (const auto& [k, v] : overrides) text += k + " = " + v + "\n";
    fs::create_directories(kRoot);
    const fs::path p = kRoot / (name + ".conf");
    std::ofstream(p) << text;
    return p;
}

std::string common(const fs::path& config, const fs::path& out) {
    return "--config " + config.string() + " --output " + out.string();
}

const fs::path& trained() {
    static const fs::path out = [] {
        const fs::path o = kRoot / "main";
        fs::remove_all(o);
        const fs::path cfg = config_with("main", {});
        REQUIRE(run_cli("train " + common(cfg, o)).code == 0);
        REQUIRE(run_cli("measure " + common(cfg, o)).code == 0);
        return o;
    }();
    return out;
}

int data_rows(const std::string& csv) {
    int n = 0;
    std::istringstream in(csv);
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            header = true;
            continue;
        }
        ++n;
    }
    return n;
}

}  // namespace

TEST_CASE("train writes a complete store and reruns are no-ops") {
    const fs::path out = trained();
    const fs::path store = out / "width_8" / "seed_0";
    for (int t = 0; t <= 3; ++t) {
        char name[32];
        std::snprintf(name, sizeof name, "ckpt_%04d.bin", t);
        CHECK(fs::exists(store / name));
    }
    CHECK_FALSE(fs::exists(store / "ckpt_0004.bin"));
    CHECK(fs::exists(store / "index.json"));
    const auto stamp = fs::last_write_time(store / "ckpt_0003.bin");
    const std::string before = slurp(store / "ckpt_0003.bin");
    CHECK(run_cli("train " + common(config_with("main", {}), out)).code == 0);
    CHECK(fs::last_write_time(store / "ckpt_0003.bin") == stamp);
    CHECK(slurp(store / "ckpt_0003.bin") == before);
}

TEST_CASE("a corrupted checkpoint is reported by name") {
    const fs::path out = kRoot / "corrupt";
    fs::remove_all(out);
    fs::copy(trained(), out, fs::copy_options::recursive);
    const fs::path victim = out / "width_8" / "seed_0" / "ckpt_0002.bin";
    std::string bytes = slurp(victim);
    bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x5a);
    std::ofstream(victim, std::ios::binary | std::ios::trunc) << bytes;
    const Run r = run_cli("train " + common(config_with("main", {}), out));
    CHECK(r.code != 0);
    CHECK(r.output.find("ckpt_0002.bin") != std::string::npos);
}

TEST_CASE("measure fails on a missing store") {
    const fs::path out = kRoot / "empty";
    fs::remove_all(out);
    const Run r = run_cli("measure " + common(config_with("main", {}), out));
    CHECK(r.code != 0);
    CHECK(r.output.find("repshift train") != std::string::npos);
    CHECK_FALSE(fs::exists(out / "metrics.csv"));
}

TEST_CASE("metrics.csv covers the grid") {
    const fs::path out = trained();
    const std::string csv = slurp(out / "metrics.csv");
    const ExperimentConfig cfg = load_experiment_config(config_with("main", {}));
    const int expect = static_cast<int>(cfg.widths.size() * cfg.seeds.size() * cfg.grid_t.size() * cfg.ks().size() *
                                        cfg.dts().size());
    CHECK(expect == 9);
    CHECK(data_rows(csv) == expect);
    CHECK(csv.rfind(provenance_line(cfg.hash, cfg.master_seed) + "\n", 0) == 0);

    // Spot cell recomputed in process from the store.
    const MetricsTable table = read_metrics_csv(out / "metrics.csv");
    const CommandContext ctx = make_context(cfg, out);
    const std::vector<BoundReport> cells = measure_run(ctx, 8, 0);
    REQUIRE(cells.size() == table.rows.size());
    for (std::size_t i = 0; i < cells.size(); ++i) CHECK(metrics_csv_row(cells[i]) == metrics_csv_row(table.rows[i]));
    for (const BoundReport& r : table.rows) {
        if (r.dt == 0) {
            CHECK(r.D_hat == 0.0);
            CHECK(r.delta_P == 0.0);
        }
        CHECK(r.D_hat <= r.rep_distance);
    }
}

TEST_CASE("analyze is deterministic and carries provenance") {
    const fs::path out = trained();
    const fs::path cfg_path = config_with("main", {});
    REQUIRE(run_cli("analyze " + common(cfg_path, out)).code == 0);
    const std::string sat = slurp(out / "saturation.csv");
    const std::string rel = slurp(out / "relationships.json");
    const std::string bnd = slurp(out / "bounds.json");
    REQUIRE(run_cli("analyze " + common(cfg_path, out)).code == 0);
    CHECK(slurp(out / "saturation.csv") == sat);
    CHECK(slurp(out / "relationships.json") == rel);
    CHECK(slurp(out / "bounds.json") == bnd);

    const ExperimentConfig cfg = load_experiment_config(cfg_path);
    CHECK(sat.rfind(provenance_line(cfg.hash, cfg.master_seed), 0) == 0);
    CHECK(sat.find("# skipped curves: 3 shorter than") != std::string::npos);
    const auto j = nlohmann::json::parse(rel);
    CHECK(j["config_hash"] == cfg.hash);
    CHECK(j["master_seed"] == cfg.master_seed);
    CHECK(j["pooled"]["cells"] == 9);
    const auto b = nlohmann::json::parse(bnd);
    CHECK(b["config_hash"] == cfg.hash);
    CHECK(b["drift"].is_null());
}

TEST_CASE("analyze refuses stale or empty inputs") {
    const fs::path out = kRoot / "stale";
    fs::remove_all(out);
    fs::create_directories(out);
    fs::copy_file(trained() / "metrics.csv", out / "metrics.csv");
    const Run stale = run_cli("analyze " + common(config_with("stale", {{"probe.iterations", "50"}}), out));
    CHECK(stale.code != 0);
    CHECK(stale.output.find("rerun `repshift measure`") != std::string::npos);

    const fs::path none = kRoot / "none";
    fs::remove_all(none);
    CHECK(run_cli("analyze " + common(config_with("main", {}), none)).code != 0);
}

TEST_CASE("an empty grid is an error") {
    const fs::path out = kRoot / "nogrid";
    fs::remove_all(out);
    const Run r = run_cli("measure " + common(config_with("nogrid", {{"grid.t", ""}}), out));
    CHECK(r.code != 0);
    CHECK(r.output.find("grid.t") != std::string::npos);
}

TEST_CASE("analyze recovers injected quartic vertices") {
    const fs::path cfg_path = config_with("synthetic", {{"stream.N", "12"}, {"run.seeds", "0..1"},
                                                        {"analysis.metrics", "delta_P"}});
    const ExperimentConfig cfg = load_experiment_config(cfg_path);
    const std::map<std::pair<int, int>, double> vertex{{{0, 1}, 3.5}, {{0, 2}, 5.0}, {{0, 3}, 6.25},
                                                       {{1, 1}, 4.0}, {{1, 2}, 7.5}, {{1, 3}, 2.75}};
    std::vector<BoundReport> rows;
    for (const auto& [key, v] : vertex) {
        for (int dt = 0; dt <= 11; ++dt) {
            BoundReport r;
            r.width = 8;
            r.seed = static_cast<std::uint64_t>(key.first);
            r.t = 1;
            r.k = key.second;
            r.dt = dt;
            const double x = dt - v;
            r.delta_P = 0.5 - 0.001 * x * x * x * x;
            r.rep_size = 1.0 + r.k;
            r.rep_distance = 0.1 * dt;
            r.D_hat = 0.05 * dt;
            r.D_method = "identity";
            r.mu_t = r.c_t = r.lambda_t = 1.0;
            r.U = r.U_inf = 1.0;
            rows.push_back(r);
        }
    }
    std::sort(rows.begin(), rows.end(), [](const BoundReport& a, const BoundReport& b) {
        return std::tie(a.seed, a.k, a.dt) < std::tie(b.seed, b.k, b.dt);
    });
    const fs::path out = kRoot / "synthetic";
    fs::remove_all(out);
    fs::create_directories(out);
    write_text_atomically(out / "metrics.csv", metrics_csv(rows, cfg.hash, cfg.master_seed));
    const Run r = run_cli("analyze " + common(cfg_path, out));
    REQUIRE_MESSAGE(r.code == 0, r.output);

    std::istringstream in(slurp(out / "saturation.csv"));
    std::string line;
    int seen = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("width", 0) == 0) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
        REQUIRE(f.size() == 9);
        const double v = vertex.at({std::stoi(f[1]), std::stoi(f[3])});
        CHECK(f[4] == "delta_P");
        REQUIRE_FALSE(f[5].empty());
        CHECK(std::abs(std::stod(f[5]) - v) <= 0.01 * v);
        ++seen;
    }
    CHECK(seen == 6);
}

TEST_CASE("verify writes its files and catches a wrong peak constant") {
    const fs::path out = trained();
    const Run ok = run_cli("verify " + common(config_with("main", {}), out));
    REQUIRE_MESSAGE(ok.code == 0, ok.output);
    const std::string suite = slurp(out / "oracle_suite.txt");
    CHECK(suite.find("FAIL") == std::string::npos);
    CHECK(suite.find("PASS f_peak") != std::string::npos);

    // t = t' = 2 starts at the optimum.
    std::istringstream in(slurp(out / "assumption1.csv"));
    std::string line;
    int same = 0;
    while (std::getline(in, line)) {
        if (line.rfind("8,0,2,2,", 0) != 0) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
        CHECK(std::stod(f[6]) <= 1e-20);
        ++same;
    }
    CHECK(same == 3 * 21);
    CHECK(slurp(out / "assumption3.csv").find("# fit skipped") != std::string::npos);

    const Run bad = run_cli("verify " + common(config_with("badpeak", {{"verify.f_peak", "1.3535533905932737"}}), out));
    CHECK(bad.code != 0);
    CHECK(slurp(out / "oracle_suite.txt").find("FAIL f_peak") != std::string::npos);
}

TEST_CASE("train and measure are reproducible") {
    const fs::path cfg_path = config_with("main", {});
    const fs::path again = kRoot / "again";
    fs::remove_all(again);
    REQUIRE(run_cli("train " + common(cfg_path, again) + " --jobs 2").code == 0);
    REQUIRE(run_cli("measure " + common(cfg_path, again) + " --jobs 2").code == 0);
    CHECK(slurp(again / "metrics.csv") == slurp(trained() / "metrics.csv"));
}

TEST_CASE("REPSHIFT_SEED overrides the master seed") {
    const fs::path cfg_path = config_with("main", {});
    const fs::path out = kRoot / "seed3";
    fs::remove_all(out);
    REQUIRE(run_cli("train " + common(cfg_path, out), "REPSHIFT_SEED=3").code == 0);
    REQUIRE(run_cli("measure " + common(cfg_path, out), "REPSHIFT_SEED=3").code == 0);
    const MetricsTable t = read_metrics_csv(out / "metrics.csv");
    CHECK(t.master_seed == 3);
    CHECK(t.config_hash == load_experiment_config(cfg_path, 3).hash);
    CHECK(slurp(out / "metrics.csv") != slurp(trained() / "metrics.csv"));

    // A store trained under another seed is not reused.
    const Run mixed = run_cli("measure " + common(cfg_path, out));
    CHECK(mixed.code != 0);
    CHECK(run_cli("train " + common(cfg_path, out), "REPSHIFT_SEED=x").code != 0);
}

TEST_CASE("argument errors") {
    CHECK(run_cli("").code != 0);
    CHECK(run_cli("train").code != 0);
    CHECK(run_cli("train --config /nonexistent.conf").code != 0);
    CHECK(run_cli("train " + common(config_with("main", {}), kRoot / "jobs") + " --jobs 0").code != 0);
    CHECK(run_cli("launch " + common(config_with("main", {}), kRoot / "jobs")).code != 0);
}
