#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "repshift/error.hpp"
#include "repshift/metrics.hpp"

namespace repshift {

double bound_shape_f(double x) { return (x * x + x) / (x * x + 1.0); }

UpperBound upper_bound_U(const BoundComponents& comp) {
    UpperBound u;
    u.U_inf = comp.mu * comp.c * comp.rep_size;
    u.U = u.U_inf * bound_shape_f(comp.omega);
    return u;
}

LambdaTable lambda_ratios(const std::vector<ReluNetwork>& models, int t) {
    const int n_tasks = static_cast<int>(models.size()) - 1;
    if (t < 1 || t > n_tasks) {
        throw DimensionError("lambda_ratios: task " + std::to_string(t) + " outside 1.." +
                             std::to_string(n_tasks));
    }
    const ReluNetwork& ref = models[static_cast<std::size_t>(t)];
    const int depth = ref.depth();
    std::vector<double> ref_norm(static_cast<std::size_t>(depth));
    for (int k = 1; k <= depth; ++k) {
        ref_norm[static_cast<std::size_t>(k - 1)] = spectral_norm(ref.layer(k));
        if (ref_norm[static_cast<std::size_t>(k - 1)] < kDenominatorTol) {
            throw NumericalError("lambda_ratios: layer " + std::to_string(k) + " of model " +
                                 std::to_string(t) + " has zero spectral norm");
        }
    }
    LambdaTable table;
    table.ratios.resize(depth, n_tasks);
    for (int tp = 1; tp <= n_tasks; ++tp) {
        const ReluNetwork& other = models[static_cast<std::size_t>(tp)];
        if (other.widths != ref.widths) throw DimensionError("lambda_ratios: models differ in shape");
        for (int k = 1; k <= depth; ++k) {
            table.ratios(k - 1, tp - 1) =
                tp == t ? 1.0 : spectral_norm(other.layer(k)) / ref_norm[static_cast<std::size_t>(k - 1)];
        }
    }
    table.lambda = table.ratios.maxCoeff();
    return table;
}

LambdaTable lambda_ratios(const CheckpointStore& store, int t) {
    std::vector<ReluNetwork> models;
    const int last = store.contiguous_prefix();
    if (last < 1) throw StoreError("lambda_ratios: store " + store.root().string() + " has no task snapshots");
    for (int j = 0; j <= last; ++j) models.push_back(restore(store, j));
    return lambda_ratios(models, t);
}

DriftStats drift_stats(const std::vector<WidthRun>& runs) {
    if (runs.size() < 2) throw Error("drift_stats: need at least two widths");
    DriftStats out;
    std::vector<double> logm;
    std::vector<double> logr;
    for (const WidthRun& run : runs) {
        if (std::find(out.widths.begin(), out.widths.end(), run.width) != out.widths.end()) {
            throw Error("drift_stats: width " + std::to_string(run.width) + " given twice");
        }
        if (run.width < 1) throw Error("drift_stats: widths must be positive");
        const int last = static_cast<int>(run.models.size()) - 1;
        if (last < 2) {
            throw Error("drift_stats: width " + std::to_string(run.width) +
                        " needs snapshots for at least two tasks");
        }
        std::vector<double> ratios;
        const int depth = run.models.front().depth();
        for (int k = 1; k <= depth; ++k) {
            for (int t = 1; t < last; ++t) {
                const Matrix& w0 = run.models[static_cast<std::size_t>(t)].layer(k);
                const Matrix& w1 = run.models[static_cast<std::size_t>(t + 1)].layer(k);
                const double denom = spectral_norm(w0);
                if (denom < kDenominatorTol) {
                    throw NumericalError("drift_stats: zero spectral norm at layer " + std::to_string(k) +
                                         ", task " + std::to_string(t));
                }
                ratios.push_back(frobenius_norm(w1 - w0) / denom);
            }
        }
        const double r = *std::max_element(ratios.begin(), ratios.end());
        if (!(r > 0.0)) {
            throw NumericalError("drift_stats: zero drift at width " + std::to_string(run.width) +
                                 " (duplicate snapshots?); log-log fit undefined");
        }
        out.widths.push_back(run.width);
        out.max_ratio.push_back(r);
        out.steps_per_width.push_back(last - 1);
        out.ratios.push_back(std::move(ratios));
        logm.push_back(std::log(static_cast<double>(run.width)));
        logr.push_back(std::log(r));
    }
    const LinearFit fit = linreg_r2(logm, logr);
    out.gamma = std::exp(fit.intercept);
    out.beta = -fit.slope;
    out.r2 = fit.r2;
    out.slack = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < out.widths.size(); ++j) {
        const double m = static_cast<double>(out.widths[j]);
        out.slack = std::min(out.slack, out.gamma * std::pow(m, -out.beta) - out.max_ratio[j]);
        out.gamma_envelope = std::max(out.gamma_envelope, out.max_ratio[j] * std::pow(m, out.beta));
    }
    return out;
}

DriftStats drift_stats(const std::vector<std::pair<int, const CheckpointStore*>>& stores) {
    std::vector<WidthRun> runs;
    for (const auto& [width, store] : stores) {
        WidthRun run;
        run.width = width;
        const int last = store->contiguous_prefix();
        for (int j = 0; j <= last; ++j) run.models.push_back(restore(*store, j));
        runs.push_back(std::move(run));
    }
    return drift_stats(runs);
}

namespace {

double power_sum(double ratio, int k) {
    double sum = 0.0;
    double term = 1.0;
    for (int i = 1; i <= k; ++i) {
        term *= ratio;
        sum += term;
    }
    return sum;
}

}  // namespace

double omega_bound(double gamma, double beta, double m, double dt, double lambda, double mu, double c,
                   int k) {
    return gamma * std::pow(m, -beta) * dt * power_sum(lambda * mu * c, k) / lambda;
}

double rate_bound(double gamma, double beta, double m, double lambda, double mu, double c, int k) {
    return (std::sqrt(2.0) - 1.0) * gamma * std::pow(m, -beta) * power_sum(lambda * mu * c, k) / lambda;
}

WeightAlignmentTrace weight_alignment_check(const Matrix& target, const Matrix& source, int epochs,
                                            double lr) {
    if (target.rows() != source.rows() || target.cols() != source.cols()) {
        throw DimensionError("weight_alignment_check: weight matrices differ in shape");
    }
    if (epochs < 0) throw ConfigError("weight_alignment_check: epochs must be >= 0");
    WeightAlignmentTrace out;
    out.loss.resize(epochs + 1);
    Matrix t = Matrix::Identity(target.rows(), target.rows());
    for (int e = 0; e <= epochs; ++e) {
        const Matrix residual = target - t * source;
        out.loss(e) = residual.squaredNorm();
        if (e < epochs) t += lr * 2.0 * residual * source.transpose();
    }
    const double ridge = default_alignment_ridge(source);
    if (ridge > 0.0) {
        const AlignmentFit fit = solve_right_alignment(source, target, ridge);
        out.closed_form = fit.transform;
        out.floor = fit.residual * fit.residual;
    } else {
        out.closed_form = Matrix::Zero(target.rows(), target.rows());
        out.floor = target.squaredNorm();
    }
    const double scale = target.squaredNorm();
    out.relative_floor = scale > 0.0 ? out.floor / scale : 0.0;
    return out;
}

WeightAlignmentTrace weight_alignment_check(const CheckpointStore& store, int t, int t_prime, int k,
                                            int epochs, double lr) {
    const ReluNetwork a = restore(store, t);
    const ReluNetwork b = restore(store, t_prime);
    return weight_alignment_check(a.layer(k), b.layer(k), epochs, lr);
}

double alignment_residual(const Matrix& target, const Matrix& source) {
    const double wnorm = spectral_norm(target);
    if (wnorm < kDenominatorTol) throw NumericalError("alignment_residual: zero target weights");
    const double ridge = default_alignment_ridge(source);
    if (!(ridge > 0.0)) return 1.0;
    const Matrix t0 = solve_right_alignment(source, target, ridge).transform;
    return spectral_norm(t0 * source - target) / wnorm;
}

double per_transform_bound(const ReluNetwork& base, const ReluNetwork& later, const TaskDataset& data,
                           int k, const Matrix& transform) {
    const Matrix below_b = layer_features(base, data.inputs, k - 1);
    const Matrix below_l = layer_features(later, data.inputs, k - 1);
    const double dist = (below_b - below_l).colwise().norm().maxCoeff();
    const double size = below_b.colwise().norm().maxCoeff();
    const Matrix tw = transform * later.layer(k);
    return dist * spectral_norm(tw) + size * spectral_norm(tw - base.layer(k));
}

ConstructedTransformCheck constructed_transform_check(const ReluNetwork& base, const ReluNetwork& later,
                                                      const TaskDataset& data, int k, double mu,
                                                      double c) {
    const Matrix below_b = layer_features(base, data.inputs, k - 1);
    const Matrix below_l = layer_features(later, data.inputs, k - 1);
    const double c1 = (below_b - below_l).colwise().norm().maxCoeff();
    const double c2 = below_b.colwise().norm().maxCoeff();
    if (c2 < kDenominatorTol) {
        throw NumericalError("constructed_transform_check: layer " + std::to_string(k - 1) +
                             " representation has zero size");
    }
    const Matrix& w = base.layer(k);
    const Matrix& wl = later.layer(k);
    const Matrix t0 = solve_right_alignment(wl, w, default_alignment_ridge(wl)).transform;

    ConstructedTransformCheck out;
    out.transform = c1 > 0.0 ? shrinkage_minimizer(t0, c1, c2) : t0;
    out.distance = max_paired_distance(layer_features(base, data.inputs, k),
                                       layer_features(later, data.inputs, k), out.transform);
    BoundComponents comp;
    comp.mu = mu;
    comp.c = c;
    comp.rep_size = layer_features(base, data.inputs, k).colwise().norm().maxCoeff();
    comp.omega = c1 / c2;
    out.U = upper_bound_U(comp).U;
    out.rho = spectral_norm(t0 * wl - w) / spectral_norm(w);
    out.allowance = mu * c * comp.rep_size * out.rho;
    return out;
}

}  // namespace repshift
