#include <algorithm>
#include <cmath>

#include "repshift/error.hpp"
#include "repshift/metrics.hpp"

namespace repshift {

std::string to_string(AlignmentMethod method) {
    switch (method) {
        case AlignmentMethod::identity: return "identity";
        case AlignmentMethod::least_squares: return "least_squares";
        case AlignmentMethod::scaled_weight_align: return "scaled_weight_align";
        case AlignmentMethod::refined: return "refined";
    }
    return "unknown";
}

namespace {

AlignmentResult evaluate(const Matrix& base, const Matrix& later, Matrix transform,
                         AlignmentMethod method) {
    AlignmentResult r;
    const Matrix residual = transform * later - base;
    r.achieved_max_distance = residual.colwise().norm().maxCoeff();
    r.frobenius_residual = residual.norm();
    r.transform = std::move(transform);
    r.method = method;
    return r;
}

// Minimax refinement of max_i ‖T a_i − b_i‖. Lawson reweighting: solve a
// weighted least-squares problem, then raise each weight by its residual, so
// mass concentrates on the samples that set the maximum. A short subgradient
// pass with diminishing Polyak-style steps polishes the best iterate.
AlignmentResult refine(const Matrix& base, const Matrix& later, const AlignmentResult& start,
                       const DiscrepancyOptions& opts) {
    const Eigen::Index n = later.cols();
    Matrix best = start.transform;
    double best_d = start.achieved_max_distance;

    Vector w = Vector::Constant(n, 1.0 / static_cast<double>(n));
    for (int step = 0; step < opts.reweight_steps; ++step) {
        const Eigen::ArrayXd sw = w.array().sqrt();
        const Matrix src = later * sw.matrix().asDiagonal();
        const Matrix dst = base * sw.matrix().asDiagonal();
        const double ridge = default_alignment_ridge(src);
        if (!(ridge > 0.0)) break;
        Matrix t;
        try {
            t = solve_right_alignment(src, dst, ridge).transform;
        } catch (const NumericalError&) {
            break;
        }
        const Eigen::RowVectorXd r = (t * later - base).colwise().norm();
        const double d = r.maxCoeff();
        if (d < best_d) {
            best_d = d;
            best = t;
        }
        w = w.cwiseProduct(r.transpose());
        const double total = w.sum();
        if (!(total > 0.0)) break;
        w /= total;
    }

    Matrix t = best;
    for (int step = 0; step < opts.subgradient_steps; ++step) {
        const Matrix residual = t * later - base;
        Eigen::Index worst = 0;
        const double d = residual.colwise().norm().maxCoeff(&worst);
        if (d < best_d) {
            best_d = d;
            best = t;
        }
        const double a2 = later.col(worst).squaredNorm();
        if (d <= 0.0 || a2 <= 0.0) break;
        const double eta = opts.subgradient_rate * d / a2 / std::sqrt(static_cast<double>(step + 1));
        t -= eta * (residual.col(worst) / d) * later.col(worst).transpose();
    }
    {
        const double d = (t * later - base).colwise().norm().maxCoeff();
        if (d < best_d) best = t;
    }
    return evaluate(base, later, std::move(best), AlignmentMethod::refined);
}

}  // namespace

DiscrepancyResult discrepancy_from_features(const Matrix& base, const Matrix& later,
                                            const DiscrepancyOptions& opts,
                                            const std::vector<AlignmentResult>& extra) {
    if (base.rows() != later.rows() || base.cols() != later.cols() || base.cols() == 0) {
        throw DimensionError("discrepancy: feature matrices must be paired and nonempty");
    }
    const Eigen::Index w = base.rows();
    DiscrepancyResult out;
    out.candidates.push_back(evaluate(base, later, Matrix::Identity(w, w), AlignmentMethod::identity));

    if (later.cwiseAbs().maxCoeff() < kDenominatorTol) {
        out.degenerate = true;
    } else {
        const double ridge = opts.ridge >= 0.0 ? opts.ridge : default_alignment_ridge(later);
        out.candidates.push_back(evaluate(base, later, solve_right_alignment(later, base, ridge).transform,
                                          AlignmentMethod::least_squares));
        for (const AlignmentResult& e : extra) {
            out.candidates.push_back(evaluate(base, later, e.transform, e.method));
        }
        if (opts.refine) {
            const auto best = std::min_element(
                out.candidates.begin(), out.candidates.end(),
                [](const auto& a, const auto& b) { return a.achieved_max_distance < b.achieved_max_distance; });
            if (best->achieved_max_distance > 0.0) out.candidates.push_back(refine(base, later, *best, opts));
        }
    }
    // First minimum wins, so Δt = 0 always reports the identity.
    const auto best = std::min_element(
        out.candidates.begin(), out.candidates.end(),
        [](const auto& a, const auto& b) { return a.achieved_max_distance < b.achieved_max_distance; });
    out.best = *best;
    out.d_hat = best->achieved_max_distance;
    return out;
}

DiscrepancyResult discrepancy(const ReluNetwork& base, const ReluNetwork& later, const TaskDataset& data,
                              int k, const DiscrepancyOptions& opts) {
    if (base.widths != later.widths) throw DimensionError("discrepancy: networks differ in shape");
    if (k < 1 || k > base.depth()) {
        throw DimensionError("discrepancy: layer " + std::to_string(k) + " outside 1.." +
                             std::to_string(base.depth()));
    }
    const Matrix hb = layer_features(base, data.inputs, k);
    const Matrix hl = layer_features(later, data.inputs, k);

    std::vector<AlignmentResult> extra;
    const Matrix below_b = layer_features(base, data.inputs, k - 1);
    const Matrix below_l = layer_features(later, data.inputs, k - 1);
    const double c2 = below_b.colwise().norm().maxCoeff();
    const double c1 = (below_b - below_l).colwise().norm().maxCoeff();
    const Matrix& wl = later.layer(k);
    const double ridge = default_alignment_ridge(wl);
    if (c2 >= kDenominatorTol && ridge > 0.0) {
        const Matrix t0 = solve_right_alignment(wl, base.layer(k), ridge).transform;
        AlignmentResult cand;
        cand.transform = c1 > 0.0 ? shrinkage_minimizer(t0, c1, c2) : t0;
        cand.method = AlignmentMethod::scaled_weight_align;
        extra.push_back(std::move(cand));
    }
    return discrepancy_from_features(hb, hl, opts, extra);
}

DiscrepancyResult discrepancy(const CheckpointStore& store, int t, int dt, const TaskDataset& data, int k,
                              const DiscrepancyOptions& opts) {
    if (dt < 0) throw DimensionError("discrepancy: Δt must be >= 0");
    return discrepancy(restore(store, t), restore(store, t + dt), data, k, opts);
}

}  // namespace repshift
