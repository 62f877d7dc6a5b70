#pragma once

// Shared mini-batch Adam loop for the fusion network and Baseline2.

#include <limits>
#include <span>
#include <vector>

#include "sasv/error.hpp"
#include "sasv/fusionnet.hpp"

namespace sasv::detail {

template <typename Params>
struct LoopResult {
    Params best_params;
    AdamState best_adam;
    std::size_t best_epoch = 0;
    TrainHistory history;
};

// loss_fn(params, span<const Item>) -> {loss, cm_loss, pred_loss, gradients}
// score_fn(params, const Item&) -> double, higher = more target-like
template <typename Params, typename Item, typename LossFn, typename ScoreFn>
LoopResult<Params> run_training(Params params, std::span<const Item> train_items, std::span<const Item> dev_items,
                                std::span<const TrialLabel> dev_labels, const TrainConfig& config, LossFn&& loss_fn,
                                ScoreFn&& score_fn) {
    config.validate();
    if (dev_items.size() != dev_labels.size()) {
        throw Error(ErrorCode::ShapeMismatch, "dev items and labels differ in length");
    }

    AdamState adam = make_adam_state(tensors(params));
    LoopResult<Params> result{params, adam, 0, {}};
    if (config.epochs == 0) return result;
    if (train_items.empty()) throw Error(ErrorCode::EmptyBatch, "no training items");

    double best_eer = std::numeric_limits<double>::infinity();
    std::uint64_t step = 0;
    std::vector<Item> batch;
    std::vector<double> dev_scores(dev_items.size());

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto order = epoch_order(train_items.size(), config.seed, epoch);
        double cm_sum = 0.0, pred_sum = 0.0, loss_sum = 0.0;

        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            batch.clear();
            for (std::size_t i = start; i < stop; ++i) batch.push_back(train_items[order[i]]);

            auto step_result = loss_fn(params, std::span<const Item>(batch));
            const double n = static_cast<double>(batch.size());
            cm_sum += step_result.cm_loss * n;
            pred_sum += step_result.pred_loss * n;
            loss_sum += step_result.loss * n;

            auto grads = tensors(step_result.gradients);
            adam_step(tensors(params), grads, adam, config.adam(), ++step);
        }

        for (std::size_t i = 0; i < dev_items.size(); ++i) dev_scores[i] = score_fn(params, dev_items[i]);
        std::vector<ScoredTrial> scored(dev_items.size());
        for (std::size_t i = 0; i < dev_items.size(); ++i) scored[i] = {dev_labels[i], dev_scores[i]};

        const double total = static_cast<double>(train_items.size());
        EpochRecord record{epoch, cm_sum / total, pred_sum / total, loss_sum / total, compute_report(scored)};
        if (record.dev.sasv.eer < best_eer) {
            best_eer = record.dev.sasv.eer;
            result.best_params = params;
            result.best_adam = adam;
            result.best_epoch = epoch;
        }
        result.history.push_back(std::move(record));
    }
    return result;
}

} // namespace sasv::detail
