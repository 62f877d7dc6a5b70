#pragma once

// Multi-model fusion network.
//
//   cm_concat = h_1 ⊕ ... ⊕ h_n            (CM embeddings of the test utterance)
//   s_cm      = f(cm_concat)               f: dense 256 → 128 → 64 (LeakyReLU) → 2 (linear)
//   y_hat     = g(s_cm ⊕ s_sv^1..s_sv^m)   g: one linear layer (2 + m) → 2
//   L         = CE(s_cm, l) + CE(y_hat, l), l = 1 for a bona fide target trial
//
// All arithmetic is double precision. Batch losses and gradients are means
// over items, reduced by pairwise summation in a fixed order.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sasv/embedstore.hpp"
#include "sasv/metrics.hpp"

namespace sasv {

inline constexpr double kLeakySlope = 0.01;

enum class Activation { Identity, LeakyRelu };

struct DenseLayer {
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    std::vector<double> weights; // outputs x inputs, row-major
    std::vector<double> bias;
    Activation activation = Activation::Identity;

    static DenseLayer zeros(std::size_t inputs, std::size_t outputs, Activation activation);

    /// pre = W x + b, out = act(pre).
    void forward(std::span<const double> x, std::span<double> pre, std::span<double> out) const;
    /// Accumulates dL/dW and dL/db into grad; writes dL/dx into dx (may be empty to skip).
    void backward(std::span<const double> x, std::span<const double> pre, std::span<const double> dout,
                  DenseLayer& grad, std::span<double> dx) const;
};

using Mlp = std::vector<DenseLayer>;

/// Hidden layers use LeakyReLU, the last layer is linear.
Mlp make_mlp(std::size_t input_dim, std::span<const std::size_t> hidden, std::size_t output_dim);

struct MlpCache {
    std::vector<std::vector<double>> inputs; // input to each layer
    std::vector<std::vector<double>> pre;    // pre-activation of each layer
    std::vector<double> output;
};

std::vector<double> mlp_forward(const Mlp& mlp, std::span<const double> input, MlpCache& cache);
/// Accumulates parameter gradients into grad (same shapes as mlp); returns dL/dinput.
std::vector<double> mlp_backward(const Mlp& mlp, const MlpCache& cache, std::span<const double> dout, Mlp& grad);

/// Zero-valued copy with identical shapes.
Mlp zeros_like(const Mlp& mlp);

struct FusionDims {
    std::size_t cm_dim = 0; // sum of the n CM embedding dims
    std::size_t num_sv = 0; // m
    std::vector<std::size_t> hidden{256, 128, 64};

    friend bool operator==(const FusionDims&, const FusionDims&) = default;
};

struct FusionParams {
    Mlp cm_layers;         // f
    DenseLayer pred_layer; // g

    FusionDims dims() const;
    /// Throws ShapeMismatch if layer shapes do not chain.
    void validate() const;
    FusionParams zeros_like() const;

    friend bool operator==(const FusionParams& a, const FusionParams& b);
};

/// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
FusionParams init_params(const FusionDims& dims, std::uint64_t seed);
void init_mlp_weights(Mlp& mlp, std::uint64_t seed);

/// Every trainable tensor in checkpoint order: f's layers (W then b), then g.
std::vector<std::span<double>> tensors(FusionParams& params);
std::vector<std::span<double>> tensors(Mlp& mlp);

struct FusionCache {
    MlpCache cm;
    std::vector<double> pred_input; // s_cm ⊕ sv_scores
    std::vector<double> pred_pre;
};

struct ForwardResult {
    std::array<double, 2> s_cm{};
    std::array<double, 2> y_hat{};
    FusionCache cache;
};

ForwardResult forward(const FusionParams& params, std::span<const double> cm_concat, std::span<const double> sv_scores);

struct CrossEntropy {
    double loss = 0.0;
    std::array<double, 2> dlogits{};
};

/// -log softmax(logits)[label] with max subtraction; dlogits = softmax - onehot.
CrossEntropy softmax_cross_entropy(std::array<double, 2> logits, int label);

/// y_hat[1] - y_hat[0].
double predict_score(const FusionParams& params, std::span<const double> cm_concat, std::span<const double> sv_scores);

struct FusionItem {
    std::vector<double> cm_concat;
    std::vector<double> sv_scores;
    int label = 0; // 1 = bona fide target trial
};

struct ClassWeights {
    double target = 1.0;
    double other = 1.0;
    double operator()(int label) const { return label == 1 ? target : other; }
};

struct LossResult {
    double loss = 0.0;      // mean of L_cm + L_pr
    double cm_loss = 0.0;   // mean L_cm
    double pred_loss = 0.0; // mean L_pr
    FusionParams gradients;
};

LossResult total_loss(const FusionParams& params, std::span<const FusionItem> batch, const ClassWeights& weights = {});

/// Pairwise sum of values in a fixed recursion order: split at n/2.
double pairwise_sum(std::span<const double> values);

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::uint64_t step = 0;

    bool empty() const { return m.empty(); }
    friend bool operator==(const AdamState&, const AdamState&) = default;
};

AdamState make_adam_state(std::span<const std::span<double>> params);

/// One bias-corrected Adam update at step t (t >= 1). Shapes of params,
/// grads and state must agree.
void adam_step(std::span<const std::span<double>> params, std::span<const std::span<double>> grads, AdamState& state,
               const AdamConfig& config, std::uint64_t t);

struct TrainConfig {
    double learning_rate = 1e-4;
    std::size_t batch_size = 32;
    std::size_t epochs = 200;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    ClassWeights class_weights;

    AdamConfig adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_eps}; }
    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0; // 1-based
    double cm_loss = 0.0;
    double pred_loss = 0.0;
    double loss = 0.0;
    MetricReport dev;
};

using TrainHistory = std::vector<EpochRecord>;

/// One item per trial plus the trial's three-way label.
struct FusionDataset {
    std::vector<FusionItem> items;
    std::vector<TrialLabel> labels;
};

/// SV scores from every ASV table and the concatenated CM embeddings of the
/// test utterance, in table order.
FusionDataset build_fusion_dataset(const ProtocolSet& protocol, std::span<const EmbeddingTable> asv_tables,
                                   std::span<const EmbeddingTable> cm_tables, const ScoringOptions& options = {});

FusionDims dims_for(std::span<const EmbeddingTable> asv_tables, std::span<const EmbeddingTable> cm_tables);

std::vector<double> predict_scores(const FusionParams& params, const FusionDataset& data);

struct FusionTrainResult {
    FusionParams best_params;
    AdamState best_adam;
    std::size_t best_epoch = 0; // 0 = initial parameters
    TrainHistory history;
};

/// Mini-batch Adam with per-epoch shuffling; keeps the parameters with the
/// lowest dev SASV-EER (earliest epoch on ties).
FusionTrainResult train(std::span<const FusionItem> train_items, const FusionDataset& dev, const FusionDims& dims,
                        const TrainConfig& config);

/// Deterministic permutation of [0, n) for one epoch.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch);

std::string history_to_csv(const TrainHistory& history);

} // namespace sasv
