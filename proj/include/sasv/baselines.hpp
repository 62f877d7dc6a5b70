#pragma once

// Reference fusion systems.
//
// Baseline1 adds the cosine SV score and the raw CM score.
// Baseline2 feeds enroll ⊕ test (one ASV model) ⊕ CM embedding (one CM model)
// to a 256 → 128 → 64 → 2 network trained with a single cross-entropy.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sasv/embedstore.hpp"
#include "sasv/fusionnet.hpp"
#include "sasv/metrics.hpp"

namespace sasv {

inline double baseline1_score(double sv_score, double cm_score) { return sv_score + cm_score; }

std::vector<double> baseline1_scores(std::span<const double> sv_scores, std::span<const double> cm_scores);

struct ScaleDomination {
    double eer_before = 0.0; // SASV-EER of sv + cm
    double eer_after = 0.0;  // SASV-EER of sv + scale * cm
};

ScaleDomination scale_domination_demo(std::span<const double> sv_scores, std::span<const double> cm_scores,
                                      std::span<const TrialLabel> labels, double scale);

struct Baseline2Item {
    std::vector<double> input; // enroll ⊕ test ⊕ cm
    int label = 0;
};

struct Baseline2Params {
    std::size_t asv_dim = 0;
    std::size_t cm_dim = 0;
    Mlp net;

    friend bool operator==(const Baseline2Params& a, const Baseline2Params& b);
};

std::vector<std::span<double>> tensors(Baseline2Params& params);

Baseline2Params init_baseline2(std::size_t asv_dim, std::size_t cm_dim, std::span<const std::size_t> hidden,
                               std::uint64_t seed);

/// Builds one input per trial. ScoreMean has no enrollment vector, so it is
/// rejected here.
std::vector<Baseline2Item> baseline2_inputs(const ProtocolSet& protocol, const EmbeddingTable& asv_table,
                                            const EmbeddingTable& cm_table,
                                            EnrollmentStrategy strategy = EnrollmentStrategy::MeanOfNormalized);

/// logit[1] - logit[0].
double baseline2_score(const Baseline2Params& params, std::span<const double> input);

struct Baseline2Loss {
    double loss = 0.0;
    double cm_loss = 0.0; // always 0: no auxiliary head
    double pred_loss = 0.0;
    Baseline2Params gradients;
};

Baseline2Loss baseline2_loss(const Baseline2Params& params, std::span<const Baseline2Item> batch,
                             const ClassWeights& weights = {});

inline constexpr std::size_t kDefaultHiddenArr[] = {256, 128, 64};
inline constexpr std::span<const std::size_t> kDefaultHidden{kDefaultHiddenArr};

struct Baseline2TrainResult {
    Baseline2Params best_params;
    AdamState best_adam;
    std::size_t best_epoch = 0;
    TrainHistory history;
};

Baseline2TrainResult train_baseline2(std::span<const Baseline2Item> train_items,
                                     std::span<const Baseline2Item> dev_items, std::span<const TrialLabel> dev_labels,
                                     std::size_t asv_dim, std::size_t cm_dim, const TrainConfig& config,
                                     std::span<const std::size_t> hidden = kDefaultHidden);

struct Baseline2Model {
    Baseline2TrainResult training;
    std::vector<double> dev_scores;
};

/// End-to-end: build inputs for both partitions, train, score dev.
Baseline2Model baseline2_model(const EmbeddingTable& asv_table, const EmbeddingTable& cm_table,
                               const ProtocolSet& train, const ProtocolSet& dev, const TrainConfig& config,
                               EnrollmentStrategy strategy = EnrollmentStrategy::MeanOfNormalized);

// Baseline2 checkpoints use the fusion layout with magic "SB2N" and the dims
// block asv_dim u32 | cm_dim u32 | num_hidden u32 | hidden u32 x num_hidden.
struct Baseline2Checkpoint {
    Baseline2Params params;
    AdamState adam;
};

std::string serialize_baseline2(const Baseline2Checkpoint& checkpoint);
Baseline2Checkpoint parse_baseline2(std::string_view bytes);
void save_baseline2(const std::filesystem::path& path, const Baseline2Checkpoint& checkpoint);
Baseline2Checkpoint load_baseline2(const std::filesystem::path& path);

} // namespace sasv
