#pragma once

// Quantities computed from snapshots and task data: representation spaces,
// their size and distance, the discrepancy estimate, layer cushion,
// activation contraction, drift ratios, the discrepancy upper bound and its
// rate bounds, weight alignment and linear-probe forgetting.
//
// Every function is pure over its inputs. Network-level overloads take the
// two models directly; store-level overloads restore them first.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "repshift/continual.hpp"
#include "repshift/linalg.hpp"
#include "repshift/network.hpp"
#include "repshift/tasks.hpp"

namespace repshift {

/// Norms below this are treated as zero and raise instead of being clamped.
inline constexpr double kDenominatorTol = 1e-12;

// ---------------------------------------------------------------------------
// Representation spaces

/// R^k_t(h_{t'}): layer-k pre-activations of model t' on X_t, one column per
/// sample in dataset order. Layer 0 is the raw input.
struct RepresentationSpace {
    int layer = 0;
    int task = 0;
    int source_model = 0;
    Matrix features;  // w_k × n_t

    int size() const { return static_cast<int>(features.cols()); }
    int dim() const { return static_cast<int>(features.rows()); }
};

RepresentationSpace rep_space(const ReluNetwork& net, int source_model, const TaskDataset& data, int k);
RepresentationSpace rep_space(const CheckpointStore& store, int source_model, const TaskDataset& data,
                              int k);

/// Largest feature norm.
double rep_size(const RepresentationSpace& space);

enum class DistanceMode {
    paired,  // max_i ‖a_i − b_i‖ over the same input
    cross,   // max_{i,j} ‖a_i − b_j‖, for sensitivity checks only
};

struct DistanceWitness {
    double distance = 0.0;
    int index = 0;  // argmax sample, lowest index on ties (paired mode)
};

double rep_distance(const RepresentationSpace& a, const RepresentationSpace& b,
                    DistanceMode mode = DistanceMode::paired);
DistanceWitness rep_distance_witness(const RepresentationSpace& a, const RepresentationSpace& b);

/// max_i ‖T·later_i − base_i‖ over paired columns.
double max_paired_distance(const Matrix& base, const Matrix& later, const Matrix& transform);

// ---------------------------------------------------------------------------
// Discrepancy

enum class AlignmentMethod { identity, least_squares, scaled_weight_align, refined };

std::string to_string(AlignmentMethod method);

struct AlignmentResult {
    Matrix transform;
    AlignmentMethod method = AlignmentMethod::identity;
    double achieved_max_distance = 0.0;
    double frobenius_residual = 0.0;  // ‖T·later − base‖_F
};

struct DiscrepancyOptions {
    /// Ridge for the least-squares candidate; negative selects the default.
    double ridge = -1.0;
    bool refine = true;
    /// Minimax reweighting passes (weighted least squares, Lawson updates).
    int reweight_steps = 40;
    /// Subgradient steps on the max-distance objective after reweighting.
    int subgradient_steps = 100;
    double subgradient_rate = 0.2;
};

/// D̂: the smallest max paired distance over a candidate set of transforms.
/// It upper-bounds the exact minimum over all linear maps.
struct DiscrepancyResult {
    double d_hat = 0.0;
    AlignmentResult best;
    std::vector<AlignmentResult> candidates;
    bool degenerate = false;  // features all zero; identity only
};

/// Candidate search on explicit feature matrices (w × n each). `extra` lets
/// callers add transforms (e.g. the weight-aligned one).
DiscrepancyResult discrepancy_from_features(const Matrix& base, const Matrix& later,
                                            const DiscrepancyOptions& opts,
                                            const std::vector<AlignmentResult>& extra = {});

/// D̂^k_t between `base` (h_t) and `later` (h_{t+Δt}) on task data X_t.
DiscrepancyResult discrepancy(const ReluNetwork& base, const ReluNetwork& later,
                              const TaskDataset& data, int k, const DiscrepancyOptions& opts = {});
DiscrepancyResult discrepancy(const CheckpointStore& store, int t, int dt, const TaskDataset& data,
                              int k, const DiscrepancyOptions& opts = {});

// ---------------------------------------------------------------------------
// Bound components

struct CushionResult {
    std::vector<double> per_layer;  // μ_{t,k}, k = 1..L
    double mu = 0.0;                // max over layers
};

/// Minimal μ with ‖W^k‖₂‖φ(h^{k−1}(x))‖ ≤ μ‖W^k φ(h^{k−1}(x))‖ for every x;
/// φ is not applied to the raw input at k = 1.
CushionResult layer_cushion(const ReluNetwork& net, const TaskDataset& data);
CushionResult layer_cushion(const CheckpointStore& store, int t, const TaskDataset& data);

/// Minimal c ≥ 1 with ‖h^{k−1}(x)‖ ≤ c‖φ(h^{k−1}(x))‖ over hidden layers and
/// samples (the raw-input term is 1).
double activation_contraction(const ReluNetwork& net, const TaskDataset& data);
double activation_contraction(const CheckpointStore& store, int t, const TaskDataset& data);

/// ω^{k−1}: layer-(k−1) distance over layer-(k−1) size. Zero at k = 1.
double omega(const ReluNetwork& base, const ReluNetwork& later, const TaskDataset& data, int k);
double omega(const CheckpointStore& store, int t, int dt, const TaskDataset& data, int k);

/// f(x) = (x² + x)/(x² + 1).
double bound_shape_f(double x);

/// Peak of f on [0, ∞): x = 1 + √2, f = (1 + √2)/2.
inline const double kBoundShapeArgmax = 1.0 + std::sqrt(2.0);
inline const double kBoundShapePeak = (1.0 + std::sqrt(2.0)) / 2.0;

struct BoundComponents {
    double mu = 0.0;
    std::vector<double> mu_per_layer;
    double c = 1.0;
    double rep_size = 0.0;  // ‖R^k_t(h_t)‖
    double omega = 0.0;     // ω^{k−1}_t(Δt)
    double lambda = 1.0;
};

struct UpperBound {
    double U = 0.0;
    double U_inf = 0.0;
};

UpperBound upper_bound_U(const BoundComponents& components);

struct LambdaTable {
    Matrix ratios;  // L × N, entry (k−1, t'−1) = ‖W^k_{t'}‖₂ / ‖W^k_t‖₂
    double lambda = 0.0;
};

/// `models[j]` is the snapshot for task j (index 0 may be the initialization;
/// only 1..N enter the table).
LambdaTable lambda_ratios(const std::vector<ReluNetwork>& models, int t);
LambdaTable lambda_ratios(const CheckpointStore& store, int t);

struct WidthRun {
    int width = 0;
    std::vector<ReluNetwork> models;  // index = task
};

struct DriftStats {
    std::vector<int> widths;
    std::vector<double> max_ratio;            // r_j, one per width
    std::vector<std::vector<double>> ratios;  // per width: [k-major, t-minor] step ratios
    std::vector<int> steps_per_width;
    double gamma = 0.0;
    double beta = 0.0;
    double r2 = 0.0;
    /// min_j (γ m_j^{−β} − r_j); negative where the fitted curve undercuts a width.
    double slack = 0.0;
    /// Smallest γ making the bound hold at every width for the fitted β.
    double gamma_envelope = 0.0;
};

/// Per-step drift ‖W^k_{t+1} − W^k_t‖_F / ‖W^k_t‖₂ for t ≥ 1, maxed per
/// width and fit as log r = log γ − β log m. Throws on fewer than two widths
/// or zero drift.
DriftStats drift_stats(const std::vector<WidthRun>& runs);
DriftStats drift_stats(const std::vector<std::pair<int, const CheckpointStore*>>& stores);

/// γ m^{−β} Δt Σ_{i=1..k} (λμc)^i / λ.
double omega_bound(double gamma, double beta, double m, double dt, double lambda, double mu, double c,
                   int k);
/// (√2 − 1) γ m^{−β} Σ_{i=1..k} (λμc)^i / λ.
double rate_bound(double gamma, double beta, double m, double lambda, double mu, double c, int k);

// ---------------------------------------------------------------------------
// Weight alignment

struct WeightAlignmentTrace {
    Vector loss;           // ‖W_t − T W_{t'}‖²_F at epochs 0..epochs
    double floor = 0.0;    // same objective at the closed-form optimum
    double relative_floor = 0.0;  // floor / ‖W_t‖²_F
    Matrix closed_form;
};

/// Gradient descent on ‖target − T·source‖²_F from T = I.
WeightAlignmentTrace weight_alignment_check(const Matrix& target, const Matrix& source, int epochs,
                                            double lr);
WeightAlignmentTrace weight_alignment_check(const CheckpointStore& store, int t, int t_prime, int k,
                                            int epochs, double lr);

/// ‖T₀W' − W‖₂ / ‖W‖₂ with T₀ the closed-form alignment of W' onto W.
double alignment_residual(const Matrix& target, const Matrix& source);

// ---------------------------------------------------------------------------
// Linear probing

enum class ProbeMetric { train, eval };

struct ProbeConfig {
    int iterations = 300;
    /// Multiplier on 1/L where L bounds the loss curvature.
    double step_scale = 1.0;
    double eval_fraction = 0.2;
    std::uint64_t seed = 0;
    ProbeMetric metric = ProbeMetric::eval;
};

struct ProbeResult {
    Matrix classifier;  // d_y × (w_k + 1); last column is the bias
    double train_accuracy = 0.0;
    double eval_accuracy = 0.0;
    int train_count = 0;
    int eval_count = 0;

    double accuracy(ProbeMetric metric) const {
        return metric == ProbeMetric::train ? train_accuracy : eval_accuracy;
    }
};

/// True for samples assigned to the evaluation split (hash of index and seed).
bool in_eval_split(int index, std::uint64_t seed, double eval_fraction);

/// Affine softmax probe on standardized features, trained by full-batch
/// gradient descent from zero for a fixed number of iterations.
ProbeResult linear_probe(const Matrix& features, const std::vector<int>& class_index, int num_classes,
                         const ProbeConfig& cfg);
ProbeResult linear_probe(const RepresentationSpace& space, const TaskDataset& data,
                         const ProbeConfig& cfg);

/// ΔP^k_t(Δt): probe accuracy on h_t features minus that on h_{t+Δt}.
double probing_forgetting(const ReluNetwork& base, const ReluNetwork& later, const TaskDataset& data,
                          int k, const ProbeConfig& cfg);
double probing_forgetting(const CheckpointStore& store, int t, int dt, const TaskDataset& data, int k,
                          const ProbeConfig& cfg);

// ---------------------------------------------------------------------------
// Proof-chain audits

/// Right side of the per-T decomposition at layer k:
/// d(R^{k−1}_t(h_t), R^{k−1}_t(h_{t'}))·‖T W'^k‖₂ + ‖R^{k−1}_t(h_t)‖·‖T W'^k − W^k‖₂.
double per_transform_bound(const ReluNetwork& base, const ReluNetwork& later, const TaskDataset& data,
                           int k, const Matrix& transform);

struct ConstructedTransformCheck {
    double distance = 0.0;   // max paired distance at layer k using T_c
    double U = 0.0;
    double rho = 0.0;        // weight-alignment residual ratio
    double allowance = 0.0;  // μ_t c_t ‖R^k_t‖ ρ
    Matrix transform;        // T_c
};

/// Builds T_c = c₂²/(c₁² + c₂²)·T₀ from the closed-form weight alignment T₀
/// with (c₁, c₂) the layer-(k−1) distance and size, and measures it.
ConstructedTransformCheck constructed_transform_check(const ReluNetwork& base, const ReluNetwork& later,
                                                      const TaskDataset& data, int k, double mu,
                                                      double c);

}  // namespace repshift
