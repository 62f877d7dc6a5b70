#include "sasv/baselines.hpp"

#include "sasv/checkpoint.hpp"
#include "sasv/detail/pairwise.hpp"
#include "sasv/detail/train_loop.hpp"
#include "sasv/error.hpp"
#include "sasv/rng.hpp"

namespace sasv {

std::vector<double> baseline1_scores(std::span<const double> sv_scores, std::span<const double> cm_scores) {
    if (sv_scores.size() != cm_scores.size()) {
        throw Error(ErrorCode::ShapeMismatch, std::to_string(sv_scores.size()) + " SV scores but " +
                                                  std::to_string(cm_scores.size()) + " CM scores");
    }
    std::vector<double> out(sv_scores.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = baseline1_score(sv_scores[i], cm_scores[i]);
    return out;
}

ScaleDomination scale_domination_demo(std::span<const double> sv_scores, std::span<const double> cm_scores,
                                      std::span<const TrialLabel> labels, double scale) {
    if (labels.size() != sv_scores.size()) throw Error(ErrorCode::ShapeMismatch, "labels and scores differ in length");
    std::vector<double> scaled(cm_scores.begin(), cm_scores.end());
    for (double& c : scaled) c *= scale;

    auto sasv_eer = [&](std::span<const double> cm) {
        const auto fused = baseline1_scores(sv_scores, cm);
        std::vector<ScoredTrial> scored(fused.size());
        for (std::size_t i = 0; i < fused.size(); ++i) scored[i] = {labels[i], fused[i]};
        return compute_report(scored).sasv.eer;
    };
    return {sasv_eer(cm_scores), sasv_eer(scaled)};
}

bool operator==(const Baseline2Params& a, const Baseline2Params& b) {
    if (a.asv_dim != b.asv_dim || a.cm_dim != b.cm_dim || a.net.size() != b.net.size()) return false;
    for (std::size_t l = 0; l < a.net.size(); ++l) {
        const auto& x = a.net[l];
        const auto& y = b.net[l];
        if (x.inputs != y.inputs || x.outputs != y.outputs || x.activation != y.activation || x.weights != y.weights ||
            x.bias != y.bias) {
            return false;
        }
    }
    return true;
}

std::vector<std::span<double>> tensors(Baseline2Params& params) { return tensors(params.net); }

Baseline2Params init_baseline2(std::size_t asv_dim, std::size_t cm_dim, std::span<const std::size_t> hidden,
                               std::uint64_t seed) {
    if (2 * asv_dim + cm_dim == 0) throw Error(ErrorCode::ShapeMismatch, "Baseline2 input width must be positive");
    Baseline2Params p{asv_dim, cm_dim, make_mlp(2 * asv_dim + cm_dim, hidden, 2)};
    init_mlp_weights(p.net, seed);
    return p;
}

std::vector<Baseline2Item> baseline2_inputs(const ProtocolSet& protocol, const EmbeddingTable& asv_table,
                                            const EmbeddingTable& cm_table, EnrollmentStrategy strategy) {
    if (strategy == EnrollmentStrategy::ScoreMean) {
        throw Error(ErrorCode::InvalidArgument, "Baseline2 needs an enrollment vector; score-mean has none");
    }
    AggregateCache cache;
    std::vector<Baseline2Item> items;
    items.reserve(protocol.trials.size());
    for (const auto& trial : protocol.trials) {
        const auto& agg = cache.get(trial.speaker_id, 0, protocol.enrollment, asv_table, strategy);
        const auto test = asv_table.at(trial.test_utt_id);
        const auto cm = cm_table.at(trial.test_utt_id);
        Baseline2Item item;
        item.input.reserve(agg.vector.size() + test.size() + cm.size());
        item.input.insert(item.input.end(), agg.vector.begin(), agg.vector.end());
        item.input.insert(item.input.end(), test.begin(), test.end());
        item.input.insert(item.input.end(), cm.begin(), cm.end());
        item.label = trial.label == TrialLabel::Target ? 1 : 0;
        items.push_back(std::move(item));
    }
    return items;
}

double baseline2_score(const Baseline2Params& params, std::span<const double> input) {
    MlpCache cache;
    const auto out = mlp_forward(params.net, input, cache);
    return out[1] - out[0];
}

Baseline2Loss baseline2_loss(const Baseline2Params& params, std::span<const Baseline2Item> batch,
                             const ClassWeights& weights) {
    if (batch.empty()) throw Error(ErrorCode::EmptyBatch, "loss of an empty batch");
    Baseline2Loss result;
    result.gradients = {params.asv_dim, params.cm_dim, zeros_like(params.net)};
    std::vector<double> losses(batch.size());

    detail::pairwise_gradients(batch.size(), result.gradients, [&](std::size_t i, Baseline2Params& grad) {
        MlpCache cache;
        const auto out = mlp_forward(params.net, batch[i].input, cache);
        const auto ce = softmax_cross_entropy({out[0], out[1]}, batch[i].label);
        const double w = weights(batch[i].label);
        losses[i] = w * ce.loss;
        const std::array<double, 2> dout{w * ce.dlogits[0], w * ce.dlogits[1]};
        mlp_backward(params.net, cache, dout, grad.net);
    });

    const double n = static_cast<double>(batch.size());
    result.pred_loss = pairwise_sum(losses) / n;
    result.loss = result.pred_loss;
    detail::divide_tensors(result.gradients, n);
    return result;
}

Baseline2TrainResult train_baseline2(std::span<const Baseline2Item> train_items,
                                     std::span<const Baseline2Item> dev_items, std::span<const TrialLabel> dev_labels,
                                     std::size_t asv_dim, std::size_t cm_dim, const TrainConfig& config,
                                     std::span<const std::size_t> hidden) {
    auto init = init_baseline2(asv_dim, cm_dim, hidden, derive_seed(config.seed, 0));
    auto loop = detail::run_training<Baseline2Params, Baseline2Item>(
        std::move(init), train_items, dev_items, dev_labels, config,
        [&](const Baseline2Params& p, std::span<const Baseline2Item> batch) {
            return baseline2_loss(p, batch, config.class_weights);
        },
        [](const Baseline2Params& p, const Baseline2Item& item) { return baseline2_score(p, item.input); });
    return {std::move(loop.best_params), std::move(loop.best_adam), loop.best_epoch, std::move(loop.history)};
}

Baseline2Model baseline2_model(const EmbeddingTable& asv_table, const EmbeddingTable& cm_table,
                               const ProtocolSet& train, const ProtocolSet& dev, const TrainConfig& config,
                               EnrollmentStrategy strategy) {
    const auto train_items = baseline2_inputs(train, asv_table, cm_table, strategy);
    const auto dev_items = baseline2_inputs(dev, asv_table, cm_table, strategy);
    std::vector<TrialLabel> dev_labels;
    for (const auto& t : dev.trials) dev_labels.push_back(t.label);

    Baseline2Model model;
    model.training = train_baseline2(train_items, dev_items, dev_labels, asv_table.dim(), cm_table.dim(), config);
    for (const auto& item : dev_items) model.dev_scores.push_back(baseline2_score(model.training.best_params, item.input));
    return model;
}

namespace {

constexpr std::string_view kBaseline2Magic = "SB2N";

} // namespace

std::string serialize_baseline2(const Baseline2Checkpoint& checkpoint) {
    Baseline2Params params = checkpoint.params;
    io::ByteWriter out;
    out.put_bytes(kBaseline2Magic);
    out.put<std::uint16_t>(kCheckpointVersion);
    out.put<std::uint32_t>(static_cast<std::uint32_t>(params.asv_dim));
    out.put<std::uint32_t>(static_cast<std::uint32_t>(params.cm_dim));
    out.put<std::uint32_t>(static_cast<std::uint32_t>(params.net.size() - 1));
    for (std::size_t l = 0; l + 1 < params.net.size(); ++l) {
        out.put<std::uint32_t>(static_cast<std::uint32_t>(params.net[l].outputs));
    }
    detail::write_tensors(out, tensors(params));
    detail::write_adam(out, checkpoint.adam);
    return out.take();
}

Baseline2Checkpoint parse_baseline2(std::string_view bytes) {
    if (bytes.substr(0, kBaseline2Magic.size()) != kBaseline2Magic) {
        throw Error(ErrorCode::BadMagic, "expected SB2N checkpoint header");
    }
    io::ByteReader in(bytes);
    in.get_bytes(kBaseline2Magic.size());
    const auto version = in.get<std::uint16_t>();
    if (version != kCheckpointVersion) {
        throw Error(ErrorCode::BadMagic, "unsupported checkpoint version " + std::to_string(version));
    }
    const std::size_t asv_dim = in.get<std::uint32_t>();
    const std::size_t cm_dim = in.get<std::uint32_t>();
    const auto num_hidden = in.get<std::uint32_t>();
    if (num_hidden > 64) throw Error(ErrorCode::ShapeMismatch, "implausible hidden layer count");
    std::vector<std::size_t> hidden;
    for (std::uint32_t i = 0; i < num_hidden; ++i) hidden.push_back(in.get<std::uint32_t>());

    Baseline2Checkpoint cp;
    cp.params = {asv_dim, cm_dim, make_mlp(2 * asv_dim + cm_dim, hidden, 2)};
    auto shape = tensors(cp.params);
    detail::read_tensors(in, shape);
    cp.adam = detail::read_adam(in, shape);
    if (!in.at_end()) throw Error(ErrorCode::ShapeMismatch, "trailing bytes after checkpoint");
    return cp;
}

void save_baseline2(const std::filesystem::path& path, const Baseline2Checkpoint& checkpoint) {
    io::write_file(path, serialize_baseline2(checkpoint));
}

Baseline2Checkpoint load_baseline2(const std::filesystem::path& path) { return parse_baseline2(io::read_file(path)); }

} // namespace sasv
