// repshift train|measure|analyze|verify --config <path> [--jobs <n>] [--output <dir>]

#include <charconv>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "repshift/error.hpp"
#include "repshift/experiment.hpp"

namespace {

std::optional<std::uint64_t> seed_from_env() {
    const char* raw = std::getenv("REPSHIFT_SEED");
    if (!raw || !*raw) return std::nullopt;
    const std::string s(raw);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw repshift::ConfigError("REPSHIFT_SEED must be a non-negative integer, got '" + s + "'");
    }
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Representation-forgetting lab: train, measure, analyze, verify"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output;
    int jobs = 1;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment config file")->required()->check(CLI::ExistingFile);
        sub->add_option("--jobs", jobs, "parallel runs")->check(CLI::PositiveNumber);
        sub->add_option("--output", output, "output directory (overrides the config)");
    };
    CLI::App* train = app.add_subcommand("train", "train every (width, seed) run and snapshot each task");
    CLI::App* measure = app.add_subcommand("measure", "evaluate the metric grid into metrics.csv");
    CLI::App* analyze = app.add_subcommand("analyze", "saturation, relationships and bounds from metrics.csv");
    CLI::App* verify = app.add_subcommand("verify", "assumption checks and the built-in oracle suite");
    for (CLI::App* sub : {train, measure, analyze, verify}) add_common(sub);

    CLI11_PARSE(app, argc, argv);

    try {
        repshift::ExperimentConfig cfg = repshift::load_experiment_config(config_path, seed_from_env());
        const repshift::CommandContext ctx = repshift::make_context(std::move(cfg), output, jobs, &std::cerr);
        if (train->parsed()) repshift::cmd_train(ctx);
        if (measure->parsed()) repshift::cmd_measure(ctx);
        if (analyze->parsed()) repshift::cmd_analyze(ctx);
        if (verify->parsed() && !repshift::cmd_verify(ctx)) {
            std::cerr << "repshift: oracle suite failed\n";
            return 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "repshift: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
