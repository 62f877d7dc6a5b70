#include "sasv/fusionnet.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "sasv/detail/pairwise.hpp"
#include "sasv/detail/train_loop.hpp"
#include "sasv/error.hpp"
#include "sasv/rng.hpp"

namespace sasv {

namespace {

[[noreturn]] void shape_error(const std::string& what) { throw Error(ErrorCode::ShapeMismatch, what); }

} // namespace

DenseLayer DenseLayer::zeros(std::size_t inputs, std::size_t outputs, Activation activation) {
    DenseLayer layer;
    layer.inputs = inputs;
    layer.outputs = outputs;
    layer.weights.assign(inputs * outputs, 0.0);
    layer.bias.assign(outputs, 0.0);
    layer.activation = activation;
    return layer;
}

void DenseLayer::forward(std::span<const double> x, std::span<double> pre, std::span<double> out) const {
    if (x.size() != inputs) {
        shape_error("layer expects " + std::to_string(inputs) + " inputs, got " + std::to_string(x.size()));
    }
    for (std::size_t o = 0; o < outputs; ++o) {
        const double* w = weights.data() + o * inputs;
        double acc = bias[o];
        for (std::size_t i = 0; i < inputs; ++i) acc += w[i] * x[i];
        pre[o] = acc;
        out[o] = (activation == Activation::LeakyRelu && acc <= 0.0) ? kLeakySlope * acc : acc;
    }
}

void DenseLayer::backward(std::span<const double> x, std::span<const double> pre, std::span<const double> dout,
                          DenseLayer& grad, std::span<double> dx) const {
    if (!dx.empty()) std::fill(dx.begin(), dx.end(), 0.0);
    for (std::size_t o = 0; o < outputs; ++o) {
        double d = dout[o];
        if (activation == Activation::LeakyRelu && pre[o] <= 0.0) d *= kLeakySlope;
        if (d == 0.0) continue;
        grad.bias[o] += d;
        const double* w = weights.data() + o * inputs;
        double* gw = grad.weights.data() + o * inputs;
        for (std::size_t i = 0; i < inputs; ++i) gw[i] += d * x[i];
        if (!dx.empty()) {
            for (std::size_t i = 0; i < inputs; ++i) dx[i] += w[i] * d;
        }
    }
}

Mlp make_mlp(std::size_t input_dim, std::span<const std::size_t> hidden, std::size_t output_dim) {
    Mlp mlp;
    std::size_t in = input_dim;
    for (std::size_t h : hidden) {
        mlp.push_back(DenseLayer::zeros(in, h, Activation::LeakyRelu));
        in = h;
    }
    mlp.push_back(DenseLayer::zeros(in, output_dim, Activation::Identity));
    return mlp;
}

std::vector<double> mlp_forward(const Mlp& mlp, std::span<const double> input, MlpCache& cache) {
    cache.inputs.resize(mlp.size());
    cache.pre.resize(mlp.size());
    std::vector<double> current(input.begin(), input.end());
    for (std::size_t l = 0; l < mlp.size(); ++l) {
        cache.inputs[l] = std::move(current);
        cache.pre[l].resize(mlp[l].outputs);
        current.assign(mlp[l].outputs, 0.0);
        mlp[l].forward(cache.inputs[l], cache.pre[l], current);
    }
    cache.output = current;
    return current;
}

std::vector<double> mlp_backward(const Mlp& mlp, const MlpCache& cache, std::span<const double> dout, Mlp& grad) {
    std::vector<double> delta(dout.begin(), dout.end());
    std::vector<double> next;
    for (std::size_t l = mlp.size(); l-- > 0;) {
        next.assign(mlp[l].inputs, 0.0);
        mlp[l].backward(cache.inputs[l], cache.pre[l], delta, grad[l], next);
        delta.swap(next);
    }
    return delta;
}

Mlp zeros_like(const Mlp& mlp) {
    Mlp out;
    out.reserve(mlp.size());
    for (const auto& layer : mlp) out.push_back(DenseLayer::zeros(layer.inputs, layer.outputs, layer.activation));
    return out;
}

FusionDims FusionParams::dims() const {
    FusionDims d;
    d.cm_dim = cm_layers.empty() ? 0 : cm_layers.front().inputs;
    d.num_sv = pred_layer.inputs >= 2 ? pred_layer.inputs - 2 : 0;
    d.hidden.clear();
    for (std::size_t l = 0; l + 1 < cm_layers.size(); ++l) d.hidden.push_back(cm_layers[l].outputs);
    return d;
}

void FusionParams::validate() const {
    if (cm_layers.empty()) shape_error("CM layer stack is empty");
    for (std::size_t l = 1; l < cm_layers.size(); ++l) {
        if (cm_layers[l].inputs != cm_layers[l - 1].outputs) shape_error("CM layers do not chain at " + std::to_string(l));
    }
    for (const auto& layer : cm_layers) {
        if (layer.weights.size() != layer.inputs * layer.outputs || layer.bias.size() != layer.outputs) {
            shape_error("CM layer tensor sizes inconsistent");
        }
    }
    if (cm_layers.back().outputs != 2) shape_error("CM layer output width must be 2");
    if (pred_layer.inputs < 2 || pred_layer.outputs != 2) shape_error("prediction layer must map 2 + m to 2");
    if (pred_layer.weights.size() != pred_layer.inputs * 2 || pred_layer.bias.size() != 2) {
        shape_error("prediction layer tensor sizes inconsistent");
    }
}

FusionParams FusionParams::zeros_like() const {
    return {sasv::zeros_like(cm_layers),
            DenseLayer::zeros(pred_layer.inputs, pred_layer.outputs, pred_layer.activation)};
}

namespace {

bool same_layer(const DenseLayer& a, const DenseLayer& b) {
    return a.inputs == b.inputs && a.outputs == b.outputs && a.activation == b.activation && a.weights == b.weights &&
           a.bias == b.bias;
}

} // namespace

bool operator==(const FusionParams& a, const FusionParams& b) {
    if (a.cm_layers.size() != b.cm_layers.size()) return false;
    for (std::size_t l = 0; l < a.cm_layers.size(); ++l) {
        if (!same_layer(a.cm_layers[l], b.cm_layers[l])) return false;
    }
    return same_layer(a.pred_layer, b.pred_layer);
}

void init_mlp_weights(Mlp& mlp, std::uint64_t seed) {
    Rng rng(seed);
    for (auto& layer : mlp) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.inputs));
        for (double& w : layer.weights) w = rng.uniform(-bound, bound);
        std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
    }
}

FusionParams init_params(const FusionDims& dims, std::uint64_t seed) {
    if (dims.cm_dim == 0) throw Error(ErrorCode::ShapeMismatch, "CM input width must be positive");
    FusionParams params;
    params.cm_layers = make_mlp(dims.cm_dim, dims.hidden, 2);
    params.pred_layer = DenseLayer::zeros(2 + dims.num_sv, 2, Activation::Identity);

    // g is drawn from the same stream right after f.
    Mlp all = params.cm_layers;
    all.push_back(params.pred_layer);
    init_mlp_weights(all, seed);
    params.pred_layer = all.back();
    all.pop_back();
    params.cm_layers = std::move(all);
    return params;
}

std::vector<std::span<double>> tensors(Mlp& mlp) {
    std::vector<std::span<double>> out;
    for (auto& layer : mlp) {
        out.emplace_back(layer.weights);
        out.emplace_back(layer.bias);
    }
    return out;
}

std::vector<std::span<double>> tensors(FusionParams& params) {
    auto out = tensors(params.cm_layers);
    out.emplace_back(params.pred_layer.weights);
    out.emplace_back(params.pred_layer.bias);
    return out;
}

ForwardResult forward(const FusionParams& params, std::span<const double> cm_concat, std::span<const double> sv_scores) {
    if (params.cm_layers.empty() || cm_concat.size() != params.cm_layers.front().inputs) {
        shape_error("CM input has " + std::to_string(cm_concat.size()) + " values, network expects " +
                    std::to_string(params.cm_layers.empty() ? 0 : params.cm_layers.front().inputs));
    }
    if (sv_scores.size() + 2 != params.pred_layer.inputs) {
        shape_error("got " + std::to_string(sv_scores.size()) + " SV scores, network expects " +
                    std::to_string(params.pred_layer.inputs - 2));
    }
    ForwardResult r;
    const auto s_cm = mlp_forward(params.cm_layers, cm_concat, r.cache.cm);
    r.s_cm = {s_cm[0], s_cm[1]};

    r.cache.pred_input.reserve(2 + sv_scores.size());
    r.cache.pred_input.assign(s_cm.begin(), s_cm.end());
    r.cache.pred_input.insert(r.cache.pred_input.end(), sv_scores.begin(), sv_scores.end());
    r.cache.pred_pre.resize(2);
    params.pred_layer.forward(r.cache.pred_input, r.cache.pred_pre, r.y_hat);
    return r;
}

CrossEntropy softmax_cross_entropy(std::array<double, 2> logits, int label) {
    if (label != 0 && label != 1) throw Error(ErrorCode::InvalidArgument, "label must be 0 or 1");
    const double mx = std::max(logits[0], logits[1]);
    const double e0 = std::exp(logits[0] - mx);
    const double e1 = std::exp(logits[1] - mx);
    const double sum = e0 + e1;
    CrossEntropy ce;
    ce.loss = std::log1p(std::min(e0, e1)) - (logits[static_cast<std::size_t>(label)] - mx);
    ce.dlogits = {e0 / sum, e1 / sum};
    ce.dlogits[static_cast<std::size_t>(label)] -= 1.0;
    return ce;
}

double predict_score(const FusionParams& params, std::span<const double> cm_concat, std::span<const double> sv_scores) {
    const auto r = forward(params, cm_concat, sv_scores);
    return r.y_hat[1] - r.y_hat[0];
}

double pairwise_sum(std::span<const double> values) {
    if (values.empty()) return 0.0;
    if (values.size() == 1) return values[0];
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

namespace {

// Gradient of item's weighted loss, accumulated into grad.
void item_gradient(const FusionParams& params, const FusionItem& item, double weight, FusionParams& grad,
                   double& cm_loss, double& pred_loss) {
    const auto r = forward(params, item.cm_concat, item.sv_scores);
    const auto ce_cm = softmax_cross_entropy(r.s_cm, item.label);
    const auto ce_pr = softmax_cross_entropy(r.y_hat, item.label);
    cm_loss = weight * ce_cm.loss;
    pred_loss = weight * ce_pr.loss;

    const std::array<double, 2> dy{weight * ce_pr.dlogits[0], weight * ce_pr.dlogits[1]};
    std::vector<double> dpred_in(params.pred_layer.inputs);
    params.pred_layer.backward(r.cache.pred_input, r.cache.pred_pre, dy, grad.pred_layer, dpred_in);

    // s_cm feeds both its own loss and g.
    const std::array<double, 2> ds_cm{weight * ce_cm.dlogits[0] + dpred_in[0], weight * ce_cm.dlogits[1] + dpred_in[1]};
    mlp_backward(params.cm_layers, r.cache.cm, ds_cm, grad.cm_layers);
}

} // namespace

LossResult total_loss(const FusionParams& params, std::span<const FusionItem> batch, const ClassWeights& weights) {
    if (batch.empty()) throw Error(ErrorCode::EmptyBatch, "loss of an empty batch");
    params.validate();

    LossResult result;
    result.gradients = params.zeros_like();
    std::vector<double> cm_losses(batch.size()), pred_losses(batch.size());
    detail::pairwise_gradients(batch.size(), result.gradients, [&](std::size_t i, FusionParams& grad) {
        item_gradient(params, batch[i], weights(batch[i].label), grad, cm_losses[i], pred_losses[i]);
    });

    const double n = static_cast<double>(batch.size());
    std::vector<double> totals(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) totals[i] = cm_losses[i] + pred_losses[i];
    result.cm_loss = pairwise_sum(cm_losses) / n;
    result.pred_loss = pairwise_sum(pred_losses) / n;
    result.loss = pairwise_sum(totals) / n;
    detail::divide_tensors(result.gradients, n);
    return result;
}

AdamState make_adam_state(std::span<const std::span<double>> params) {
    AdamState state;
    for (auto p : params) {
        state.m.emplace_back(p.size(), 0.0);
        state.v.emplace_back(p.size(), 0.0);
    }
    return state;
}

void adam_step(std::span<const std::span<double>> params, std::span<const std::span<double>> grads, AdamState& state,
               const AdamConfig& config, std::uint64_t t) {
    if (t == 0) throw Error(ErrorCode::InvalidArgument, "Adam step index starts at 1");
    if (params.size() != grads.size() || params.size() != state.m.size() || params.size() != state.v.size()) {
        shape_error("Adam tensor count mismatch");
    }
    const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto p = params[k];
        auto g = grads[k];
        auto& m = state.m[k];
        auto& v = state.v[k];
        if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size()) {
            shape_error("Adam tensor " + std::to_string(k) + " size mismatch");
        }
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            p[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
        }
    }
    state.step = t;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be positive");
    if (batch_size == 0) throw Error(ErrorCode::InvalidArgument, "batch size must be at least 1");
    if (!(class_weights.target > 0.0) || !(class_weights.other > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "class weights must be positive");
    }
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(derive_seed(seed, 0x5348554646ULL + epoch));
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = rng.below(i);
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

FusionTrainResult train(std::span<const FusionItem> train_items, const FusionDataset& dev, const FusionDims& dims,
                        const TrainConfig& config) {
    auto init = init_params(dims, derive_seed(config.seed, 0));
    auto loop = detail::run_training<FusionParams, FusionItem>(
        std::move(init), train_items, dev.items, dev.labels, config,
        [&](const FusionParams& p, std::span<const FusionItem> batch) {
            return total_loss(p, batch, config.class_weights);
        },
        [](const FusionParams& p, const FusionItem& item) { return predict_score(p, item.cm_concat, item.sv_scores); });
    return {std::move(loop.best_params), std::move(loop.best_adam), loop.best_epoch, std::move(loop.history)};
}

FusionDataset build_fusion_dataset(const ProtocolSet& protocol, std::span<const EmbeddingTable> asv_tables,
                                   std::span<const EmbeddingTable> cm_tables, const ScoringOptions& options) {
    if (cm_tables.empty()) throw Error(ErrorCode::ShapeMismatch, "at least one CM table is required");
    const auto sv = compute_sv_scores(protocol, asv_tables, options);
    FusionDataset data;
    data.items.resize(protocol.trials.size());
    data.labels.resize(protocol.trials.size());
    for (std::size_t t = 0; t < protocol.trials.size(); ++t) {
        const Trial& trial = protocol.trials[t];
        FusionItem& item = data.items[t];
        for (const auto& table : cm_tables) {
            const auto emb = table.at(trial.test_utt_id);
            item.cm_concat.insert(item.cm_concat.end(), emb.begin(), emb.end());
        }
        item.sv_scores = sv.rows[t];
        item.label = trial.label == TrialLabel::Target ? 1 : 0;
        data.labels[t] = trial.label;
    }
    return data;
}

FusionDims dims_for(std::span<const EmbeddingTable> asv_tables, std::span<const EmbeddingTable> cm_tables) {
    FusionDims dims;
    for (const auto& t : cm_tables) dims.cm_dim += t.dim();
    dims.num_sv = asv_tables.size();
    return dims;
}

std::vector<double> predict_scores(const FusionParams& params, const FusionDataset& data) {
    std::vector<double> scores;
    scores.reserve(data.items.size());
    for (const auto& item : data.items) scores.push_back(predict_score(params, item.cm_concat, item.sv_scores));
    return scores;
}

std::string history_to_csv(const TrainHistory& history) {
    std::string out = "epoch,cm_loss,pred_loss,loss,dev_sv_eer,dev_spf_eer,dev_sasv_eer\n";
    char buf[64];
    auto num = [&](double v) {
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
        out.append(buf, ptr);
    };
    for (const auto& r : history) {
        out += std::to_string(r.epoch);
        for (double v : {r.cm_loss, r.pred_loss, r.loss, r.dev.sv.eer, r.dev.spf.eer, r.dev.sasv.eer}) {
            out += ',';
            num(v);
        }
        out += '\n';
    }
    return out;
}

} // namespace sasv
