#include "repshift/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <tuple>

#include "repshift/error.hpp"

namespace repshift {

std::string to_string(CurveMetric metric) {
    switch (metric) {
        case CurveMetric::delta_p: return "delta_P";
        case CurveMetric::d_hat: return "D_hat";
        case CurveMetric::U: return "U";
    }
    return "unknown";
}

CurveMetric parse_curve_metric(const std::string& name) {
    if (name == "delta_P") return CurveMetric::delta_p;
    if (name == "D_hat") return CurveMetric::d_hat;
    if (name == "U") return CurveMetric::U;
    throw ConfigError("unknown curve metric '" + name + "' (expected delta_P, D_hat or U)");
}

double metric_value(const BoundReport& row, CurveMetric metric) {
    switch (metric) {
        case CurveMetric::delta_p: return row.delta_P;
        case CurveMetric::d_hat: return row.D_hat;
        case CurveMetric::U: return row.U;
    }
    return 0.0;
}

ForgettingCurve build_curve(RunMetrics& run, int t, int k, CurveMetric metric) {
    ForgettingCurve curve;
    curve.t = t;
    curve.k = k;
    curve.metric = metric;
    for (int dt = 0; t + dt <= run.num_tasks(); ++dt) {
        curve.dt.push_back(dt);
        if (metric == CurveMetric::delta_p) {
            curve.values.push_back(run.delta_p(t, k, dt));
        } else {
            curve.values.push_back(metric_value(run.report(t, k, dt), metric));
        }
    }
    if (curve.dt.empty()) throw StoreError("build_curve: no snapshot for task " + std::to_string(t));
    return curve;
}

ForgettingCurve build_curve(const std::vector<BoundReport>& rows, int width, std::uint64_t seed, int t, int k,
                            CurveMetric metric) {
    std::map<int, double> by_dt;
    for (const BoundReport& r : rows) {
        if (r.width != width || r.seed != seed || r.t != t || r.k != k) continue;
        if (!by_dt.emplace(r.dt, metric_value(r, metric)).second) {
            throw Error("build_curve: duplicate row for dt = " + std::to_string(r.dt));
        }
    }
    if (by_dt.empty()) {
        throw Error("build_curve: no rows for (width " + std::to_string(width) + ", seed " + std::to_string(seed) +
                    ", t " + std::to_string(t) + ", k " + std::to_string(k) + ")");
    }
    ForgettingCurve curve;
    curve.t = t;
    curve.k = k;
    curve.metric = metric;
    curve.width = width;
    curve.seed = seed;
    int expect = 0;
    for (const auto& [dt, v] : by_dt) {
        if (dt != expect) {
            throw Error("build_curve: rows for (width " + std::to_string(width) + ", t " + std::to_string(t) +
                        ", k " + std::to_string(k) + ") skip dt = " + std::to_string(expect));
        }
        curve.dt.push_back(dt);
        curve.values.push_back(v);
        ++expect;
    }
    return curve;
}

SaturationResult saturation(const ForgettingCurve& curve) {
    if (curve.size() < kSaturationMinPoints) {
        throw Error("saturation: curve has " + std::to_string(curve.size()) + " points, need at least " +
                    std::to_string(kSaturationMinPoints));
    }
    SaturationResult out;
    out.fit = polyfit(curve.dt, curve.values, kSaturationDegree);
    const double rss = residual_sum_of_squares(out.fit, curve.dt, curve.values);
    double mean = 0.0;
    for (double v : curve.values) mean += v;
    mean /= static_cast<double>(curve.size());
    double tss = 0.0;
    for (double v : curve.values) tss += (v - mean) * (v - mean);
    out.fit_r2 = tss > 0.0 ? 1.0 - rss / tss : (rss == 0.0 ? 1.0 : 0.0);

    out.dt_sat = first_local_max(out.fit, curve.dt.front(), curve.dt.back());
    if (out.dt_sat && *out.dt_sat > 0.0) out.rate = 1.0 / *out.dt_sat;

    const auto peak = std::max_element(curve.values.begin(), curve.values.end());
    out.raw_argmax = curve.dt[static_cast<std::size_t>(peak - curve.values.begin())];
    return out;
}

Regression regress(std::string x_name, std::string y_name, const std::vector<double>& xs,
                   const std::vector<double>& ys) {
    const LinearFit fit = linreg_r2(xs, ys);
    Regression r;
    r.x = std::move(x_name);
    r.y = std::move(y_name);
    r.slope = fit.slope;
    r.intercept = fit.intercept;
    r.r2 = fit.r2;
    r.count = static_cast<int>(xs.size());
    return r;
}

RelationshipReport relationship_report(const std::vector<BoundReport>& rows, int t, int dt) {
    std::map<int, const BoundReport*> by_k;
    std::vector<double> dhat;
    std::vector<double> dp_all;
    for (const BoundReport& r : rows) {
        if (r.t != t) continue;
        dhat.push_back(r.D_hat);
        dp_all.push_back(r.delta_P);
        if (r.dt == dt && !by_k.emplace(r.k, &r).second) {
            throw Error("relationship_report: duplicate row for k = " + std::to_string(r.k));
        }
    }
    if (by_k.size() < 3) {
        throw Error("relationship_report: need at least three layers at t = " + std::to_string(t) +
                    ", dt = " + std::to_string(dt));
    }
    std::vector<double> ks;
    std::vector<double> sizes;
    std::vector<double> dps;
    for (const auto& [k, r] : by_k) {
        ks.push_back(k);
        sizes.push_back(r->rep_size);
        dps.push_back(r->delta_P);
    }
    RelationshipReport out;
    out.delta_p_vs_size = regress("rep_size", "delta_P", sizes, dps);
    out.size_vs_k = regress("k", "rep_size", ks, sizes);
    out.delta_p_vs_d_hat = regress("D_hat", "delta_P", dhat, dp_all);
    return out;
}

RelationshipReport relationship_report(RunMetrics& run, int t, int dt) {
    std::vector<BoundReport> rows;
    for (int k = 1; k <= run.depth(); ++k) {
        for (int d = 0; t + d <= run.num_tasks(); ++d) rows.push_back(run.report(t, k, d));
    }
    return relationship_report(rows, t, dt);
}

namespace {

constexpr double kTieTol = 1e-9;

MedianEntry median_entry(int key, const std::vector<std::optional<double>>& values) {
    MedianEntry e;
    e.key = key;
    std::vector<double> defined;
    for (const auto& v : values) {
        if (v) defined.push_back(*v);
        else ++e.missing;
    }
    e.defined = static_cast<int>(defined.size());
    if (!defined.empty()) e.median = median(defined);
    return e;
}

// `sign` = −1 counts strict decreases along the sorted key, +1 strict increases.
void tally(Monotonicity& m, const std::optional<double>& lo, const std::optional<double>& hi, int sign) {
    if (!lo || !hi) {
        ++m.skipped;
        return;
    }
    ++m.pairs;
    const double diff = *hi - *lo;
    if (std::abs(diff) <= kTieTol) ++m.ties;
    else if (diff * sign > 0.0) ++m.hits;
}

}  // namespace

RateSweep rate_sweep(std::vector<SweepCell> cells) {
    std::sort(cells.begin(), cells.end(), [](const SweepCell& a, const SweepCell& b) {
        return std::tie(a.width, a.seed, a.k) < std::tie(b.width, b.seed, b.k);
    });
    std::set<int> widths;
    std::set<int> ks;
    std::set<std::uint64_t> seeds;
    std::map<std::tuple<int, std::uint64_t, int>, std::optional<double>> table;
    for (const SweepCell& c : cells) {
        widths.insert(c.width);
        ks.insert(c.k);
        seeds.insert(c.seed);
        if (!table.emplace(std::make_tuple(c.width, c.seed, c.k), c.dt_sat).second) {
            throw Error("rate_sweep: duplicate cell");
        }
    }
    if (widths.size() < 2 || ks.size() < 2) throw Error("rate_sweep: need at least two widths and two layers");

    RateSweep out;
    out.cells = cells;
    out.widths.assign(widths.begin(), widths.end());
    out.ks.assign(ks.begin(), ks.end());
    auto at = [&](int w, std::uint64_t s, int k) -> std::optional<double> {
        const auto it = table.find(std::make_tuple(w, s, k));
        return it == table.end() ? std::nullopt : it->second;
    };

    for (int w : out.widths) {
        for (std::uint64_t s : seeds) {
            for (std::size_t i = 0; i + 1 < out.ks.size(); ++i) {
                tally(out.k_decreasing, at(w, s, out.ks[i]), at(w, s, out.ks[i + 1]), -1);
            }
        }
    }
    for (std::uint64_t s : seeds) {
        for (int k : out.ks) {
            for (std::size_t j = 0; j + 1 < out.widths.size(); ++j) {
                tally(out.width_increasing, at(out.widths[j], s, k), at(out.widths[j + 1], s, k), +1);
            }
        }
    }
    for (Monotonicity* m : {&out.k_decreasing, &out.width_increasing}) {
        m->fraction = m->pairs > 0 ? static_cast<double>(m->hits) / static_cast<double>(m->pairs) : 0.0;
    }

    for (int k : out.ks) {
        std::vector<std::optional<double>> v;
        for (const SweepCell& c : cells) if (c.k == k) v.push_back(c.dt_sat);
        out.median_by_k.push_back(median_entry(k, v));
    }
    for (int w : out.widths) {
        std::vector<std::optional<double>> v;
        for (const SweepCell& c : cells) if (c.width == w) v.push_back(c.dt_sat);
        out.median_by_width.push_back(median_entry(w, v));
        std::vector<MedianEntry> row;
        for (int k : out.ks) {
            std::vector<std::optional<double>> vk;
            for (const SweepCell& c : cells) if (c.width == w && c.k == k) vk.push_back(c.dt_sat);
            row.push_back(median_entry(k, vk));
        }
        out.median_grid.push_back(std::move(row));
    }
    return out;
}

namespace {

double pearson_or_nan(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() >= 2 ? pearson(a, b) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

TightnessReport bound_tightness(RunMetrics& run, int t, int k) {
    TightnessReport out;
    for (int dt = 0; t + dt <= run.num_tasks(); ++dt) {
        const BoundReport r = run.report(t, k, dt);
        out.dt.push_back(dt);
        out.d_hat.push_back(r.D_hat);
        out.U.push_back(r.U);
        out.allowance.push_back(r.mu_t * r.c_t * r.rep_size * r.align_residual);
    }
    out.correlation = pearson_or_nan(out.d_hat, out.U);
    return out;
}

TightnessReport bound_tightness(const std::vector<BoundReport>& rows, int width, std::uint64_t seed, int t,
                                int k) {
    std::map<int, const BoundReport*> by_dt;
    for (const BoundReport& r : rows) {
        if (r.width == width && r.seed == seed && r.t == t && r.k == k) by_dt.emplace(r.dt, &r);
    }
    TightnessReport out;
    for (const auto& [dt, r] : by_dt) {
        out.dt.push_back(dt);
        out.d_hat.push_back(r->D_hat);
        out.U.push_back(r->U);
        out.allowance.push_back(r->mu_t * r->c_t * r->rep_size * r->align_residual);
    }
    out.correlation = pearson_or_nan(out.d_hat, out.U);
    return out;
}

}  // namespace repshift
