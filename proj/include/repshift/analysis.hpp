#pragma once

// Curve-level analysis: forgetting curves over Δt, saturation by quartic fit,
// layer/width sweeps of Δt_sat, and the linear relationships between size,
// discrepancy and probing forgetting.
//
// Everything here works on plain records so that `repshift analyze` can run
// from metrics.csv alone; the RunMetrics overloads are thin wrappers.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "repshift/linalg.hpp"
#include "repshift/report.hpp"

namespace repshift {

enum class CurveMetric { delta_p, d_hat, U };

std::string to_string(CurveMetric metric);
CurveMetric parse_curve_metric(const std::string& name);

struct ForgettingCurve {
    int t = 0;
    int k = 0;
    CurveMetric metric = CurveMetric::delta_p;
    std::vector<double> dt;      // 0, 1, ..., N − t
    std::vector<double> values;
    int width = 0;
    std::uint64_t seed = 0;
    std::string config_hash;

    int size() const { return static_cast<int>(dt.size()); }
};

/// Value of `metric` in a measured cell.
double metric_value(const BoundReport& row, CurveMetric metric);

ForgettingCurve build_curve(RunMetrics& run, int t, int k, CurveMetric metric);
/// Curve from already-measured rows; Δt must cover 0..max without gaps.
ForgettingCurve build_curve(const std::vector<BoundReport>& rows, int width, std::uint64_t seed, int t,
                            int k, CurveMetric metric);

inline constexpr int kSaturationDegree = 4;
inline constexpr int kSaturationMinPoints = 6;

struct SaturationResult {
    Polynomial fit;
    std::optional<double> dt_sat;
    std::optional<double> rate;  // 1 / Δt_sat
    double fit_r2 = 0.0;
    double raw_argmax = 0.0;     // Δt of the largest raw value, lowest on ties
};

/// Quartic fit over the whole curve and its first interior local maximum.
SaturationResult saturation(const ForgettingCurve& curve);

struct Regression {
    std::string x;
    std::string y;
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    int count = 0;
};

Regression regress(std::string x_name, std::string y_name, const std::vector<double>& xs,
                   const std::vector<double>& ys);

struct RelationshipReport {
    Regression delta_p_vs_size;    // ΔP^k_t(Δt) on ‖R^k_t(h_t)‖ over k
    Regression size_vs_k;          // ‖R^k_t(h_t)‖ on k
    Regression delta_p_vs_d_hat;   // ΔP on D̂ over every (k, Δt) cell of the run
};

/// Rows of one run (one width, one seed); uses every k at the given (t, Δt).
RelationshipReport relationship_report(const std::vector<BoundReport>& rows, int t, int dt);
RelationshipReport relationship_report(RunMetrics& run, int t, int dt);

struct SweepCell {
    int width = 0;
    std::uint64_t seed = 0;
    int k = 0;
    std::optional<double> dt_sat;
};

struct MedianEntry {
    int key = 0;  // k or width
    std::optional<double> median;
    int defined = 0;
    int missing = 0;
};

struct Monotonicity {
    double fraction = 0.0;  // pairs moving in the expected direction / pairs compared
    int pairs = 0;
    int hits = 0;
    int ties = 0;
    int skipped = 0;  // adjacent pairs with a missing Δt_sat
};

struct RateSweep {
    std::vector<SweepCell> cells;
    Monotonicity k_decreasing;      // adjacent k within (width, seed)
    Monotonicity width_increasing;  // adjacent widths within (seed, k)
    std::vector<MedianEntry> median_by_k;
    std::vector<MedianEntry> median_by_width;
    /// Medians per (width, k): rows follow the sorted widths, columns the sorted ks.
    std::vector<int> widths;
    std::vector<int> ks;
    std::vector<std::vector<MedianEntry>> median_grid;
};

/// Deterministic summaries of Δt_sat over the (width, seed, k) cells.
RateSweep rate_sweep(std::vector<SweepCell> cells);

struct TightnessReport {
    std::vector<double> dt;
    std::vector<double> d_hat;
    std::vector<double> U;
    std::vector<double> allowance;  // μc‖R‖ρ of the constructed transform
    double correlation = 0.0;        // Pearson(D̂, U); NaN if either is constant
};

TightnessReport bound_tightness(RunMetrics& run, int t, int k);
TightnessReport bound_tightness(const std::vector<BoundReport>& rows, int width, std::uint64_t seed, int t,
                                int k);

}  // namespace repshift
