#include "repshift/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "repshift/analysis.hpp"
#include "repshift/error.hpp"
#include "repshift/io.hpp"
#include "repshift/linalg.hpp"
#include "repshift/seeding.hpp"

namespace repshift {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct Cell {
    int width;
    int seed;
};

std::vector<Cell> run_cells(const ExperimentConfig& cfg) {
    std::vector<Cell> cells;
    for (int w : cfg.widths) {
        for (int s : cfg.seeds) cells.push_back({w, s});
    }
    return cells;
}

void say(const CommandContext& ctx, const std::string& line) {
    static std::mutex mu;
    if (!ctx.log) return;
    std::lock_guard lock(mu);
    *ctx.log << line << '\n';
    ctx.log->flush();
}

ordered_json number(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

ordered_json optional_number(const std::optional<double>& v) { return v ? number(*v) : ordered_json(nullptr); }

ordered_json regression_json(const Regression& r) {
    return ordered_json{{"x", r.x},
                        {"y", r.y},
                        {"slope", number(r.slope)},
                        {"intercept", number(r.intercept)},
                        {"r2", number(r.r2)},
                        {"count", r.count}};
}

ordered_json provenance_json(const CommandContext& ctx) {
    return ordered_json{{"config_hash", ctx.config.hash}, {"master_seed", ctx.config.master_seed}};
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

double median_or_nan(std::vector<double> v) {
    v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return !std::isfinite(x); }), v.end());
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    return median(std::move(v));
}

}  // namespace

CommandContext make_context(ExperimentConfig config, const fs::path& output, int jobs, std::ostream* log) {
    if (jobs < 1) throw ConfigError("--jobs must be >= 1");
    CommandContext ctx;
    ctx.output_dir = output.empty() ? config.output_dir : output;
    ctx.config = std::move(config);
    ctx.jobs = jobs;
    ctx.log = log;
    return ctx;
}

fs::path store_dir(const fs::path& output_dir, int width, int seed) {
    return output_dir / ("width_" + std::to_string(width)) / ("seed_" + std::to_string(seed));
}

TaskSequence run_stream(const ExperimentConfig& cfg, int seed) {
    StreamConfig sc = cfg.stream;
    sc.seed = stream_seed(cfg.master_seed, seed);
    return generate_split_stream(sc);
}

ReluNetwork run_initial_network(const ExperimentConfig& cfg, int seed, int width) {
    return init_network(cfg.layer_widths(width), init_seed(cfg.master_seed, seed, width), cfg.train.init_scale);
}

TrainConfig run_train_config(const ExperimentConfig& cfg, int seed, int width) {
    TrainConfig tc = cfg.train;
    tc.seed = train_seed(cfg.master_seed, seed, width);
    return tc;
}

MeasureOptions run_measure_options(const ExperimentConfig& cfg, int seed) {
    MeasureOptions opts = cfg.measure;
    opts.probe.seed = probe_seed(cfg.master_seed, seed);
    return opts;
}

CheckpointStore open_store(const CommandContext& ctx, int width, int seed) {
    const fs::path dir = store_dir(ctx.output_dir, width, seed);
    if (!fs::exists(dir / "index.json")) {
        throw StoreError("missing store " + dir.string() + " (run `repshift train` first)");
    }
    CheckpointStore store(dir);
    if (store.config_hash() != ctx.config.train_hash) {
        throw StoreError("store " + dir.string() + " was trained under config " + store.config_hash() +
                         ", current training settings hash to " + ctx.config.train_hash);
    }
    const int n = ctx.config.stream.num_tasks;
    if (store.contiguous_prefix() < n) {
        throw StoreError("store " + dir.string() + " holds snapshots 0.." +
                         std::to_string(store.contiguous_prefix()) + ", expected 0.." + std::to_string(n) +
                         " (rerun `repshift train`)");
    }
    return store;
}

void parallel_for(int count, int jobs, const std::function<void(int)>& fn) {
    if (count <= 0) return;
    const int workers = std::max(1, std::min(jobs, count));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    auto work = [&] {
        for (int i = next++; i < count && !failed; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
                failed = true;
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (std::thread& th : pool) th.join();
    }
    for (const std::exception_ptr& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

// ---------------------------------------------------------------------------
// train

void cmd_train(const CommandContext& ctx) {
    const ExperimentConfig& cfg = ctx.config;
    const std::vector<Cell> cells = run_cells(cfg);
    parallel_for(static_cast<int>(cells.size()), ctx.jobs, [&](int i) {
        const Cell c = cells[static_cast<std::size_t>(i)];
        const fs::path dir = store_dir(ctx.output_dir, c.width, c.seed);
        CheckpointStore store(dir, cfg.train_hash, train_seed(cfg.master_seed, c.seed, c.width));
        const int before = store.contiguous_prefix();
        const TaskSequence seq = run_stream(cfg, c.seed);
        run_continual(run_initial_network(cfg, c.seed, c.width), seq, run_train_config(cfg, c.seed, c.width),
                      store);
        if (before >= seq.size()) {
            say(ctx, "train " + dir.string() + ": complete, verified");
        } else {
            say(ctx, "train " + dir.string() + ": tasks " + std::to_string(std::max(before, 0) + 1) + ".." +
                         std::to_string(seq.size()) + " done");
        }
    });
}

// ---------------------------------------------------------------------------
// measure

std::vector<BoundReport> measure_run(const CommandContext& ctx, int width, int seed) {
    const ExperimentConfig& cfg = ctx.config;
    const CheckpointStore store = open_store(ctx, width, seed);
    const TaskSequence seq = run_stream(cfg, seed);
    std::vector<ReluNetwork> models;
    for (int j = 0; j <= seq.size(); ++j) models.push_back(restore(store, j));
    RunMetrics run(std::move(models), seq, run_measure_options(cfg, seed), width,
                   static_cast<std::uint64_t>(seed));
    std::vector<BoundReport> rows;
    for (int t : cfg.grid_t) {
        for (int k : cfg.ks()) {
            for (int dt : cfg.dts()) rows.push_back(run.report(t, k, dt));
        }
    }
    return rows;
}

void cmd_measure(const CommandContext& ctx) {
    const std::vector<Cell> cells = run_cells(ctx.config);
    // Fail on a missing store before spending time on the others.
    for (const Cell& c : cells) open_store(ctx, c.width, c.seed);

    std::vector<std::vector<BoundReport>> per_run(cells.size());
    parallel_for(static_cast<int>(cells.size()), ctx.jobs, [&](int i) {
        const Cell c = cells[static_cast<std::size_t>(i)];
        per_run[static_cast<std::size_t>(i)] = measure_run(ctx, c.width, c.seed);
        say(ctx, "measure width " + std::to_string(c.width) + " seed " + std::to_string(c.seed) + ": " +
                     std::to_string(per_run[static_cast<std::size_t>(i)].size()) + " cells");
    });

    std::vector<BoundReport> rows;
    for (auto& part : per_run) {
        for (BoundReport& r : part) rows.push_back(std::move(r));
    }
    std::sort(rows.begin(), rows.end(), [](const BoundReport& a, const BoundReport& b) {
        return std::tie(a.width, a.seed, a.t, a.k, a.dt) < std::tie(b.width, b.seed, b.t, b.k, b.dt);
    });
    const fs::path out = ctx.output_dir / "metrics.csv";
    write_text_atomically(out, metrics_csv(rows, ctx.config.hash, ctx.config.master_seed));
    say(ctx, "wrote " + out.string() + " (" + std::to_string(rows.size()) + " rows)");
}

// ---------------------------------------------------------------------------
// analyze

namespace {

using RunKey = std::pair<int, std::uint64_t>;  // width, seed

std::map<RunKey, std::vector<BoundReport>> group_by_run(const std::vector<BoundReport>& rows) {
    std::map<RunKey, std::vector<BoundReport>> out;
    for (const BoundReport& r : rows) out[{r.width, r.seed}].push_back(r);
    return out;
}

// Δt values present for one (run, t, k), or empty if they are not 0..max.
std::vector<int> contiguous_dts(const std::vector<BoundReport>& run_rows, int t, int k) {
    std::set<int> dts;
    for (const BoundReport& r : run_rows) {
        if (r.t == t && r.k == k) dts.insert(r.dt);
    }
    if (dts.empty() || *dts.begin() != 0 || *dts.rbegin() != static_cast<int>(dts.size()) - 1) return {};
    return {dts.begin(), dts.end()};
}

struct SaturationRow {
    int width;
    std::uint64_t seed;
    int t;
    int k;
    std::string metric;
    SaturationResult result;
};

std::vector<DriftStats> drift_per_seed(const CommandContext& ctx, std::vector<DriftStats>* out) {
    const ExperimentConfig& cfg = ctx.config;
    std::vector<DriftStats> stats;
    for (int s : cfg.seeds) {
        std::vector<CheckpointStore> stores;
        for (int w : cfg.widths) stores.push_back(open_store(ctx, w, s));
        std::vector<std::pair<int, const CheckpointStore*>> pairs;
        for (std::size_t i = 0; i < stores.size(); ++i) pairs.emplace_back(cfg.widths[i], &stores[i]);
        stats.push_back(drift_stats(pairs));
    }
    if (out) *out = stats;
    return stats;
}

// Fit over widths of the largest ratio any seed produced at that width.
LinearFit pooled_drift_fit(const std::vector<DriftStats>& per_seed, std::vector<int>* widths,
                           std::vector<double>* pooled) {
    std::map<int, double> worst;
    for (const DriftStats& d : per_seed) {
        for (std::size_t j = 0; j < d.widths.size(); ++j) {
            worst[d.widths[j]] = std::max(worst[d.widths[j]], d.max_ratio[j]);
        }
    }
    std::vector<double> lx, ly;
    for (const auto& [w, r] : worst) {
        widths->push_back(w);
        pooled->push_back(r);
        lx.push_back(std::log(static_cast<double>(w)));
        ly.push_back(std::log(r));
    }
    return linreg_r2(lx, ly);
}

}  // namespace

void cmd_analyze(const CommandContext& ctx) {
    const ExperimentConfig& cfg = ctx.config;
    const fs::path metrics_path = ctx.output_dir / "metrics.csv";
    if (!fs::exists(metrics_path)) {
        throw Error("missing " + metrics_path.string() + " (run `repshift measure` first)");
    }
    const MetricsTable table = read_metrics_csv(metrics_path);
    if (table.config_hash != cfg.hash) {
        throw Error(metrics_path.string() + " was written under config " + table.config_hash +
                    ", current config hashes to " + cfg.hash + " (rerun `repshift measure`)");
    }
    if (table.rows.empty()) throw Error(metrics_path.string() + " has no rows: the metric grid is empty");

    const auto runs = group_by_run(table.rows);
    const int t0 = *std::min_element(cfg.grid_t.begin(), cfg.grid_t.end());
    std::set<int> ks_present;
    for (const BoundReport& r : table.rows) ks_present.insert(r.k);

    // saturation.csv
    std::vector<SaturationRow> sat_rows;
    int too_short = 0;
    int gapped = 0;
    for (const auto& [key, rows] : runs) {
        std::set<std::pair<int, int>> tk;
        for (const BoundReport& r : rows) tk.insert({r.t, r.k});
        for (const auto& [t, k] : tk) {
            const std::vector<int> dts = contiguous_dts(rows, t, k);
            if (dts.empty()) {
                ++gapped;
                continue;
            }
            if (static_cast<int>(dts.size()) < kSaturationMinPoints) {
                ++too_short;
                continue;
            }
            for (const std::string& name : cfg.analysis_metrics) {
                const CurveMetric metric = parse_curve_metric(name);
                const ForgettingCurve curve = build_curve(rows, key.first, key.second, t, k, metric);
                sat_rows.push_back({key.first, key.second, t, k, name, saturation(curve)});
            }
        }
    }
    std::string sat = provenance_line(cfg.hash, cfg.master_seed) + "\n";
    if (too_short || gapped) {
        sat += "# skipped curves: " + std::to_string(too_short) + " shorter than " +
               std::to_string(kSaturationMinPoints) + " points, " + std::to_string(gapped) +
               " without a contiguous dt range from 0\n";
    }
    sat += "width,seed,t,k,metric,dt_sat,rate,fit_r2,raw_argmax\n";
    for (const SaturationRow& s : sat_rows) {
        sat += std::to_string(s.width) + "," + std::to_string(s.seed) + "," + std::to_string(s.t) + "," +
               std::to_string(s.k) + "," + s.metric + "," + format_optional(s.result.dt_sat) + "," +
               format_optional(s.result.rate) + "," + format_double(s.result.fit_r2) + "," +
               format_double(s.result.raw_argmax) + "\n";
    }
    write_text_atomically(ctx.output_dir / "saturation.csv", sat);

    // relationships.json
    ordered_json rel = provenance_json(ctx);
    const int dt_rel = cfg.stream.num_tasks - t0;
    rel["t"] = t0;
    rel["dt"] = dt_rel;
    ordered_json per_run = ordered_json::array();
    std::vector<double> size_k_r2, dp_size_slope, dp_size_r2;
    for (const auto& [key, rows] : runs) {
        std::set<int> ks;
        for (const BoundReport& r : rows) {
            if (r.t == t0 && r.dt == dt_rel) ks.insert(r.k);
        }
        if (ks.size() < 3) continue;
        const RelationshipReport rr = relationship_report(rows, t0, dt_rel);
        per_run.push_back(ordered_json{{"width", key.first},
                                       {"seed", key.second},
                                       {"delta_p_vs_size", regression_json(rr.delta_p_vs_size)},
                                       {"size_vs_k", regression_json(rr.size_vs_k)},
                                       {"delta_p_vs_d_hat", regression_json(rr.delta_p_vs_d_hat)}});
        size_k_r2.push_back(rr.size_vs_k.r2);
        dp_size_slope.push_back(rr.delta_p_vs_size.slope);
        dp_size_r2.push_back(rr.delta_p_vs_size.r2);
    }
    rel["runs"] = per_run;
    rel["median"] = ordered_json{{"size_vs_k_r2", number(median_or_nan(size_k_r2))},
                                 {"delta_p_vs_size_slope", number(median_or_nan(dp_size_slope))},
                                 {"delta_p_vs_size_r2", number(median_or_nan(dp_size_r2))}};
    std::vector<double> all_d, all_p;
    for (const BoundReport& r : table.rows) {
        all_d.push_back(r.D_hat);
        all_p.push_back(r.delta_P);
    }
    rel["pooled"] = ordered_json{{"delta_p_vs_d_hat", regression_json(regress("D_hat", "delta_P", all_d, all_p))},
                                 {"pearson_d_hat_delta_p", number(pearson(all_d, all_p))},
                                 {"cells", table.rows.size()}};
    write_text_atomically(ctx.output_dir / "relationships.json", dump(rel));

    // bounds.json
    ordered_json bounds = provenance_json(ctx);
    ordered_json drift = nullptr;
    std::optional<LinearFit> pooled_fit;
    if (cfg.widths.size() >= 2) {
        std::vector<DriftStats> per_seed;
        drift_per_seed(ctx, &per_seed);
        std::vector<int> widths;
        std::vector<double> pooled;
        pooled_fit = pooled_drift_fit(per_seed, &widths, &pooled);
        ordered_json seeds = ordered_json::array();
        for (std::size_t i = 0; i < per_seed.size(); ++i) {
            const DriftStats& d = per_seed[i];
            seeds.push_back(ordered_json{{"seed", cfg.seeds[i]},
                                         {"widths", d.widths},
                                         {"max_ratio", d.max_ratio},
                                         {"gamma", number(d.gamma)},
                                         {"beta", number(d.beta)},
                                         {"r2", number(d.r2)},
                                         {"slack", number(d.slack)},
                                         {"gamma_envelope", number(d.gamma_envelope)}});
        }
        drift = ordered_json{{"widths", widths},
                             {"max_ratio", pooled},
                             {"gamma", number(std::exp(pooled_fit->intercept))},
                             {"beta", number(-pooled_fit->slope)},
                             {"r2", number(pooled_fit->r2)},
                             {"per_seed", seeds}};
    }
    bounds["drift"] = drift;

    ordered_json rates = ordered_json::array();
    if (pooled_fit) {
        const double gamma = std::exp(pooled_fit->intercept);
        const double beta = -pooled_fit->slope;
        for (int m : cfg.widths) {
            std::vector<double> lam, mu, c;
            for (const BoundReport& r : table.rows) {
                if (r.width == m && r.t == t0) {
                    lam.push_back(r.lambda_t);
                    mu.push_back(r.mu_t);
                    c.push_back(r.c_t);
                }
            }
            if (lam.empty()) continue;
            const double lm = median_or_nan(lam), mm = median_or_nan(mu), cm = median_or_nan(c);
            for (int k : cfg.sweep_ks()) {
                rates.push_back(ordered_json{{"width", m},
                                             {"k", k},
                                             {"lambda", number(lm)},
                                             {"mu", number(mm)},
                                             {"c", number(cm)},
                                             {"rate_bound", number(rate_bound(gamma, beta, m, lm, mm, cm, k))}});
            }
        }
    }
    bounds["rate_bound"] = rates;

    ordered_json tight = ordered_json::array();
    std::vector<double> correlations;
    for (const auto& [key, rows] : runs) {
        std::set<std::pair<int, int>> tk;
        for (const BoundReport& r : rows) tk.insert({r.t, r.k});
        for (const auto& [t, k] : tk) {
            const TightnessReport tr = bound_tightness(rows, key.first, key.second, t, k);
            if (tr.dt.size() < 2) continue;
            correlations.push_back(tr.correlation);
            tight.push_back(ordered_json{
                {"width", key.first}, {"seed", key.second}, {"t", t}, {"k", k}, {"correlation", number(tr.correlation)}});
        }
    }
    bounds["tightness"] = ordered_json{{"median_correlation", number(median_or_nan(correlations))}, {"cells", tight}};

    const std::string sweep_metric = cfg.analysis_metrics.empty() ? "delta_P" : cfg.analysis_metrics.front();
    const std::vector<int> sweep_ks = cfg.sweep_ks();
    std::vector<SweepCell> sweep_cells;
    for (const SaturationRow& s : sat_rows) {
        if (s.t == t0 && s.metric == sweep_metric &&
            std::find(sweep_ks.begin(), sweep_ks.end(), s.k) != sweep_ks.end()) {
            sweep_cells.push_back({s.width, s.seed, s.k, s.result.dt_sat});
        }
    }
    std::set<int> sweep_widths, sweep_kset;
    for (const SweepCell& c : sweep_cells) {
        sweep_widths.insert(c.width);
        sweep_kset.insert(c.k);
    }
    ordered_json sweep = nullptr;
    if (sweep_widths.size() >= 2 && sweep_kset.size() >= 2) {
        const RateSweep rs = rate_sweep(sweep_cells);
        auto medians = [](const std::vector<MedianEntry>& es) {
            ordered_json arr = ordered_json::array();
            for (const MedianEntry& e : es) {
                arr.push_back(ordered_json{
                    {"key", e.key}, {"median", optional_number(e.median)}, {"defined", e.defined}, {"missing", e.missing}});
            }
            return arr;
        };
        auto mono = [](const Monotonicity& m) {
            return ordered_json{{"fraction", number(m.fraction)}, {"pairs", m.pairs}, {"hits", m.hits},
                                {"ties", m.ties}, {"skipped", m.skipped}};
        };
        ordered_json grid = ordered_json::array();
        for (const auto& row : rs.median_grid) grid.push_back(medians(row));
        sweep = ordered_json{{"metric", sweep_metric},
                             {"t", t0},
                             {"k_decreasing", mono(rs.k_decreasing)},
                             {"width_increasing", mono(rs.width_increasing)},
                             {"median_by_k", medians(rs.median_by_k)},
                             {"median_by_width", medians(rs.median_by_width)},
                             {"widths", rs.widths},
                             {"ks", rs.ks},
                             {"median_grid", grid}};
    }
    bounds["rate_sweep"] = sweep;
    write_text_atomically(ctx.output_dir / "bounds.json", dump(bounds));

    say(ctx, "wrote saturation.csv (" + std::to_string(sat_rows.size()) + " curves), relationships.json, bounds.json");
}

// ---------------------------------------------------------------------------
// verify

std::vector<OracleCheck> oracle_suite(const ExperimentConfig& cfg) {
    std::vector<OracleCheck> checks;
    auto add = [&](std::string name, bool ok, std::string detail) {
        checks.push_back({std::move(name), ok, std::move(detail)});
    };
    std::mt19937_64 rng(mix_seed(cfg.master_seed, 0x4f5241434c45ULL));
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto random_matrix = [&](int r, int c) {
        Matrix m(r, c);
        for (int i = 0; i < r; ++i) {
            for (int j = 0; j < c; ++j) m(i, j) = gauss(rng);
        }
        return m;
    };

    {
        // Shrinkage minimizer: closed form, and no perturbation does better.
        bool ok = true;
        double worst_gap = 0.0;
        std::uniform_real_distribution<double> uni(0.1, 3.0);
        for (int trial = 0; trial < 20 && ok; ++trial) {
            const Matrix a = random_matrix(4, 3);
            const double c1 = uni(rng), c2 = uni(rng);
            const Matrix x = shrinkage_minimizer(a, c1, c2);
            const Matrix expected = (c2 * c2 / (c1 * c1 + c2 * c2)) * a;
            if ((x - expected).norm() > 1e-12 * std::max(1.0, a.norm())) ok = false;
            auto objective = [&](const Matrix& m) {
                return c1 * c1 * m.squaredNorm() + c2 * c2 * (m - a).squaredNorm();
            };
            const double best = objective(x);
            for (int p = 0; p < 100; ++p) {
                const double gap = objective(x + 0.1 * random_matrix(4, 3)) - best;
                worst_gap = std::min(worst_gap, gap);
                if (gap < 0.0) ok = false;
            }
        }
        add("shrinkage_minimizer", ok, "min objective gap over perturbations " + format_double(worst_gap));
    }
    {
        // Golden-section search for the peak of f on [0, 100].
        double lo = 0.0, hi = 100.0;
        const double g = (std::sqrt(5.0) - 1.0) / 2.0;
        double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
        double f1 = bound_shape_f(x1), f2 = bound_shape_f(x2);
        for (int i = 0; i < 200; ++i) {
            if (f1 < f2) {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = bound_shape_f(x2);
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = bound_shape_f(x1);
            }
        }
        const double argmax = 0.5 * (lo + hi);
        const double peak = bound_shape_f(argmax);
        add("f_peak", std::abs(peak - cfg.verify_f_peak) <= 1e-9,
            "golden-section max " + format_double(peak) + " vs reference " + format_double(cfg.verify_f_peak));
        add("f_argmax", std::abs(argmax - kBoundShapeArgmax) <= 1e-6,
            "golden-section argmax " + format_double(argmax) + " vs " + format_double(kBoundShapeArgmax));
        add("f_endpoints", bound_shape_f(0.0) == 0.0 && bound_shape_f(1.0) == 1.0 &&
                               std::abs(bound_shape_f(1e9) - 1.0) <= 1e-6,
            "f(0) = " + format_double(bound_shape_f(0.0)) + ", f(1) = " + format_double(bound_shape_f(1.0)));
    }
    {
        double worst = 0.0;
        for (int i = 0; i < 50; ++i) {
            std::uniform_int_distribution<int> dim(1, 12);
            const Matrix m = random_matrix(dim(rng), dim(rng));
            const double oracle = Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
            worst = std::max(worst, std::abs(spectral_norm(m) - oracle) / oracle);
        }
        add("spectral_norm_vs_svd", worst <= 1e-8, "worst relative error " + format_double(worst));
    }
    {
        const double gamma = 0.7, beta = 0.5, m = 16.0;
        const double got = rate_bound(gamma, beta, m, 1.0, 1.0, 1.0, 1);
        const double expected = (std::sqrt(2.0) - 1.0) * gamma * std::pow(m, -beta);
        add("rate_bound_coefficient", std::abs(got - expected) <= 1e-12,
            format_double(got) + " vs " + format_double(expected));
    }
    return checks;
}

bool cmd_verify(const CommandContext& ctx) {
    const ExperimentConfig& cfg = ctx.config;
    const std::vector<Cell> cells = run_cells(cfg);
    for (const Cell& c : cells) open_store(ctx, c.width, c.seed);
    const std::string header = provenance_line(cfg.hash, cfg.master_seed) + "\n";

    // assumption1.csv
    std::vector<std::string> a1_parts(cells.size());
    parallel_for(static_cast<int>(cells.size()), ctx.jobs, [&](int i) {
        const Cell c = cells[static_cast<std::size_t>(i)];
        const CheckpointStore store = open_store(ctx, c.width, c.seed);
        std::string part;
        for (const auto& [t, tp] : cfg.alignment_pairs()) {
            for (int k = 1; k <= cfg.depth; ++k) {
                const WeightAlignmentTrace tr = weight_alignment_check(store, t, tp, k, cfg.verify_epochs, cfg.verify_lr);
                const std::string prefix = std::to_string(c.width) + "," + std::to_string(c.seed) + "," +
                                           std::to_string(t) + "," + std::to_string(tp) + "," + std::to_string(k) + ",";
                for (Eigen::Index e = 0; e < tr.loss.size(); ++e) {
                    part += prefix + std::to_string(e) + "," + format_double(tr.loss(e)) + "," +
                            format_double(tr.floor) + "\n";
                }
            }
        }
        a1_parts[static_cast<std::size_t>(i)] = std::move(part);
    });
    std::string a1 = header + "width,seed,t,t_prime,k,epoch,loss,closed_form_floor\n";
    for (const std::string& p : a1_parts) a1 += p;
    write_text_atomically(ctx.output_dir / "assumption1.csv", a1);

    // assumption3.csv
    std::string a3 = header;
    std::string a3_rows;
    if (cfg.widths.size() >= 2) {
        std::vector<DriftStats> per_seed;
        drift_per_seed(ctx, &per_seed);
        std::vector<int> widths;
        std::vector<double> pooled;
        const LinearFit fit = pooled_drift_fit(per_seed, &widths, &pooled);
        a3 += "# fit pooled gamma=" + format_double(std::exp(fit.intercept)) + " beta=" + format_double(-fit.slope) +
              " r2=" + format_double(fit.r2) + "\n";
        for (std::size_t i = 0; i < per_seed.size(); ++i) {
            const DriftStats& d = per_seed[i];
            a3 += "# fit seed=" + std::to_string(cfg.seeds[i]) + " gamma=" + format_double(d.gamma) +
                  " beta=" + format_double(d.beta) + " r2=" + format_double(d.r2) + "\n";
            for (std::size_t j = 0; j < d.widths.size(); ++j) {
                // ratios are k-major over the steps t = 1..N−1.
                const int steps = d.steps_per_width[j];
                for (std::size_t q = 0; q < d.ratios[j].size(); ++q) {
                    const int k = static_cast<int>(q) / steps + 1;
                    const int t = static_cast<int>(q) % steps + 1;
                    a3_rows += std::to_string(d.widths[j]) + "," + std::to_string(cfg.seeds[i]) + "," +
                               std::to_string(k) + "," + std::to_string(t) + "," + format_double(d.ratios[j][q]) + "\n";
                }
            }
        }
    } else {
        a3 += "# fit skipped: needs at least two widths\n";
    }
    a3 += "width,seed,k,t,drift_ratio\n" + a3_rows;
    write_text_atomically(ctx.output_dir / "assumption3.csv", a3);

    // oracle suite
    const std::vector<OracleCheck> checks = oracle_suite(cfg);
    std::string report = header;
    bool all = true;
    for (const OracleCheck& c : checks) {
        const std::string line = std::string(c.passed ? "PASS " : "FAIL ") + c.name + ": " + c.detail;
        report += line + "\n";
        say(ctx, line);
        all = all && c.passed;
    }
    write_text_atomically(ctx.output_dir / "oracle_suite.txt", report);
    return all;
}

}  // namespace repshift
