#include <gtest/gtest.h>

#include <cmath>

#include "fd_check.hpp"
#include "sasv/checkpoint.hpp"
#include "sasv/fusionnet.hpp"
#include "sasv/syndata.hpp"
#include "test_util.hpp"

using namespace sasv;
using sasv::test::code_of;

namespace {

FusionDims tiny_dims(std::size_t cm_dim = 5, std::size_t m = 2) { return {cm_dim, m, {4, 3, 2}}; }

FusionParams zero_params(const FusionDims& dims) { return init_params(dims, 1).zeros_like(); }

double leaky(double x) { return x > 0 ? x : 0.01 * x; }

} // namespace

TEST(Forward, ZeroNetwork) {
    const auto params = zero_params(FusionDims{6, 2});
    std::vector<double> cm(6, 1.5), sv{0.3, -0.7};
    const auto r = forward(params, cm, sv);
    EXPECT_EQ(r.s_cm, (std::array<double, 2>{0, 0}));
    EXPECT_EQ(r.y_hat, (std::array<double, 2>{0, 0}));
    EXPECT_EQ(predict_score(params, cm, sv), 0.0);
}

TEST(Forward, HandComputedToyNet) {
    FusionDims dims{2, 1, {2, 2, 2}};
    auto params = zero_params(dims);
    auto& L = params.cm_layers;
    L[0].weights = {1, -1, 0.5, 2};
    L[0].bias = {0.1, -0.2};
    L[1].weights = {1, 0, 0, -1};
    L[2].weights = {2, 1, 1, 1};
    L[2].bias = {0, 1};
    L[3].weights = {1, 2, 3, -1};
    L[3].bias = {0.5, 0};
    params.pred_layer.weights = {1, 0, 1, 0, 1, 2};
    params.pred_layer.bias = {0, 0.1};

    const double x0 = 1, x1 = 2, sv = 0.7;
    const double a0 = leaky(1 * x0 - 1 * x1 + 0.1), a1 = leaky(0.5 * x0 + 2 * x1 - 0.2);
    const double b0 = leaky(a0), b1 = leaky(-a1);
    const double c0 = leaky(2 * b0 + b1), c1 = leaky(b0 + b1 + 1);
    const double s0 = c0 + 2 * c1 + 0.5, s1 = 3 * c0 - c1;
    const double y0 = s0 + sv, y1 = s1 + 2 * sv + 0.1;

    std::vector<double> cm{x0, x1}, svs{sv};
    const auto r = forward(params, cm, svs);
    EXPECT_DOUBLE_EQ(r.s_cm[0], s0);
    EXPECT_DOUBLE_EQ(r.s_cm[1], s1);
    EXPECT_DOUBLE_EQ(r.y_hat[0], y0);
    EXPECT_DOUBLE_EQ(r.y_hat[1], y1);
    EXPECT_DOUBLE_EQ(predict_score(params, cm, svs), y1 - y0);
}

TEST(Forward, Shapes) {
    const auto params = init_params(FusionDims{4, 3}, 5);
    std::vector<double> cm(4, 0.5), sv(3, 0.1);
    const auto r = forward(params, cm, sv);
    EXPECT_EQ(r.cache.pred_input.size(), 5u);
    EXPECT_EQ(params.pred_layer.inputs, 5u);
    EXPECT_EQ(params.pred_layer.outputs, 2u);

    std::vector<double> short_cm(3), short_sv(2);
    EXPECT_EQ(code_of([&] { forward(params, short_cm, sv); }), ErrorCode::ShapeMismatch);
    EXPECT_EQ(code_of([&] { forward(params, cm, short_sv); }), ErrorCode::ShapeMismatch);
}

TEST(CrossEntropy, Examples) {
    const auto uniform = softmax_cross_entropy({0, 0}, 1);
    EXPECT_DOUBLE_EQ(uniform.loss, 0.6931471805599453);
    EXPECT_DOUBLE_EQ(uniform.dlogits[0], 0.5);
    EXPECT_DOUBLE_EQ(uniform.dlogits[1], -0.5);

    const auto confident = softmax_cross_entropy({10, -10}, 0);
    EXPECT_NEAR(confident.loss, std::log1p(std::exp(-20.0)), 1e-20);
    EXPECT_NEAR(confident.loss, 2.0612e-9, 1e-13);

    const auto huge = softmax_cross_entropy({1000, -1000}, 1);
    EXPECT_TRUE(std::isfinite(huge.loss));
    EXPECT_DOUBLE_EQ(huge.loss, 2000.0);
}

TEST(TotalLoss, ZeroNetworkIsTwoLn2) {
    const auto dims = tiny_dims();
    const auto params = zero_params(dims);
    Rng rng(1);
    for (int label : {0, 1}) {
        auto items = sasv::test::random_items(dims, 1, rng);
        items[0].label = label;
        EXPECT_DOUBLE_EQ(total_loss(params, items).loss, 2 * std::log(2.0));
    }
}

TEST(TotalLoss, Errors) {
    const auto dims = tiny_dims();
    const auto params = zero_params(dims);
    std::vector<FusionItem> none;
    EXPECT_EQ(code_of([&] { total_loss(params, none); }), ErrorCode::EmptyBatch);
    std::vector<FusionItem> bad{{std::vector<double>(2), std::vector<double>(2), 1}};
    EXPECT_EQ(code_of([&] { total_loss(params, bad); }), ErrorCode::ShapeMismatch);
}

TEST(TotalLoss, FiniteDifferenceGradients) {
    Rng rng(77);
    const auto dims = tiny_dims(5, 2);
    const auto params = sasv::test::random_params(dims, rng);
    const auto items = sasv::test::random_items(dims, 4, rng);
    const auto check = sasv::test::check_gradients(params, items);
    EXPECT_GT(check.checked, 50u);
    EXPECT_LT(check.max_rel_error, 1e-5);
}

TEST(TotalLossProperty, DuplicationInvariance) {
    Rng rng(3);
    for (int iter = 0; iter < 10; ++iter) {
        const auto dims = tiny_dims(3 + rng.below(4), 1 + rng.below(3));
        const auto params = sasv::test::random_params(dims, rng);
        const auto items = sasv::test::random_items(dims, 1 + rng.below(9), rng);
        auto doubled = items;
        doubled.insert(doubled.end(), items.begin(), items.end());
        const auto a = total_loss(params, items);
        const auto b = total_loss(params, doubled);
        EXPECT_EQ(a.loss, b.loss);
        EXPECT_EQ(a.gradients, b.gradients);
    }
}

TEST(TotalLossProperty, AdditivityAndNonNegativity) {
    Rng rng(4);
    for (int iter = 0; iter < 10; ++iter) {
        const auto dims = tiny_dims();
        const auto params = sasv::test::random_params(dims, rng);
        const auto items = sasv::test::random_items(dims, 7, rng);
        double cm = 0, pred = 0;
        for (const auto& it : items) {
            const auto r = forward(params, it.cm_concat, it.sv_scores);
            cm += softmax_cross_entropy(r.s_cm, it.label).loss;
            pred += softmax_cross_entropy(r.y_hat, it.label).loss;
        }
        const auto L = total_loss(params, items);
        EXPECT_NEAR(L.cm_loss, cm / 7, 1e-12);
        EXPECT_NEAR(L.pred_loss, pred / 7, 1e-12);
        EXPECT_NEAR(L.loss, (cm + pred) / 7, 1e-12);
        EXPECT_GE(L.cm_loss, 0.0);
        EXPECT_GE(L.pred_loss, 0.0);
    }
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
    std::vector<double> p{1.0, -2.0, 3.5}, g{0, 0, 0};
    std::vector<std::span<double>> ps{p}, gs{g};
    auto state = make_adam_state(ps);
    adam_step(ps, gs, state, {}, 1);
    EXPECT_EQ(p, (std::vector<double>{1.0, -2.0, 3.5}));
}

TEST(Adam, OneStepByHand) {
    std::vector<double> p{0.0}, g{1.0};
    std::vector<std::span<double>> ps{p}, gs{g};
    auto state = make_adam_state(ps);
    AdamConfig cfg;
    adam_step(ps, gs, state, cfg, 1);
    // m = 0.1, v = 0.001, m_hat = 1, v_hat = 1.
    EXPECT_NEAR(state.m[0][0], 0.1, 1e-15);
    EXPECT_NEAR(state.v[0][0], 0.001, 1e-15);
    EXPECT_NEAR(p[0], -cfg.learning_rate / (1 + cfg.epsilon), 1e-18);
}

TEST(Adam, Errors) {
    std::vector<double> p{0.0}, g{1.0, 2.0};
    std::vector<std::span<double>> ps{p}, gs{g};
    auto state = make_adam_state(ps);
    EXPECT_EQ(code_of([&] { adam_step(ps, gs, state, {}, 1); }), ErrorCode::ShapeMismatch);
    std::vector<std::span<double>> ok{p};
    EXPECT_EQ(code_of([&] { adam_step(ps, ok, state, {}, 0); }), ErrorCode::InvalidArgument);
}

TEST(Adam, DeterministicAndDescends) {
    Rng rng(12);
    const auto dims = tiny_dims();
    const auto start = sasv::test::random_params(dims, rng);
    const auto batch = sasv::test::random_items(dims, 8, rng);
    const double initial = total_loss(start, batch).loss;

    auto run = [&] {
        auto params = start;
        auto state = make_adam_state(tensors(params));
        AdamConfig cfg{1e-3};
        for (std::uint64_t t = 1; t <= 200; ++t) {
            auto L = total_loss(params, batch);
            adam_step(tensors(params), tensors(L.gradients), state, cfg, t);
        }
        return params;
    };
    const auto a = run();
    const auto b = run();
    EXPECT_EQ(a, b);
    EXPECT_LT(total_loss(a, batch).loss, initial);
}

TEST(PredictScore, LogitDifference) {
    FusionDims dims{1, 1, {1, 1, 1}};
    auto params = zero_params(dims);
    params.pred_layer.bias = {3, 5};
    std::vector<double> cm{0.2}, sv{0.4};
    EXPECT_DOUBLE_EQ(predict_score(params, cm, sv), 2.0);
}

TEST(PredictScore, RankingMatchesSoftmax) {
    Rng rng(21);
    const auto dims = tiny_dims();
    const auto params = sasv::test::random_params(dims, rng);
    const auto items = sasv::test::random_items(dims, 100, rng);
    std::vector<double> score, prob;
    for (const auto& it : items) {
        score.push_back(predict_score(params, it.cm_concat, it.sv_scores));
        const auto y = forward(params, it.cm_concat, it.sv_scores).y_hat;
        prob.push_back(std::exp(y[1]) / (std::exp(y[0]) + std::exp(y[1])));
    }
    for (std::size_t i = 0; i < items.size(); ++i) {
        for (std::size_t j = 0; j < items.size(); ++j) {
            if (std::abs(score[i] - score[j]) < 1e-9) continue;
            EXPECT_EQ(score[i] < score[j], prob[i] < prob[j]);
        }
    }
}

TEST(Init, SeededAndBounded) {
    const FusionDims dims{100, 2, {1000, 8, 4}};
    const auto a = init_params(dims, 9);
    EXPECT_EQ(a, init_params(dims, 9));
    EXPECT_FALSE(a == init_params(dims, 10));

    const auto& w = a.cm_layers[0].weights;
    ASSERT_EQ(w.size(), 100000u);
    double sum = 0;
    for (double x : w) {
        EXPECT_LE(std::abs(x), 0.1);
        sum += x;
    }
    const double sigma_of_mean = (0.1 / std::sqrt(3.0)) / std::sqrt(double(w.size()));
    EXPECT_LT(std::abs(sum / double(w.size())), 3 * sigma_of_mean);
    for (const auto& layer : a.cm_layers) {
        for (double b : layer.bias) EXPECT_EQ(b, 0.0);
    }
}

TEST(Train, ZeroEpochsReturnsInitialParams) {
    Rng rng(5);
    const auto dims = tiny_dims();
    const auto items = sasv::test::random_items(dims, 6, rng);
    FusionDataset dev{items, {TrialLabel::Target, TrialLabel::NonTarget, TrialLabel::Spoof, TrialLabel::Target,
                              TrialLabel::NonTarget, TrialLabel::Spoof}};
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.seed = 11;
    const auto r = train(items, dev, dims, cfg);
    EXPECT_TRUE(r.history.empty());
    EXPECT_EQ(r.best_epoch, 0u);
    EXPECT_EQ(r.best_params, init_params(dims, derive_seed(11, 0)));
}

TEST(Train, EpochOrderIsAPermutation) {
    auto order = epoch_order(50, 3, 2);
    EXPECT_EQ(order, epoch_order(50, 3, 2));
    EXPECT_NE(order, epoch_order(50, 3, 3));
    std::sort(order.begin(), order.end());
    for (std::size_t i = 0; i < order.size(); ++i) EXPECT_EQ(order[i], i);
}

class TrainOnCorpus : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        corpus_ = new SyntheticCorpus(generate(SyntheticCorpusSpec{}));
        train_ = new FusionDataset(build_fusion_dataset(corpus_->train, corpus_->asv_tables, corpus_->cm_tables));
        dev_ = new FusionDataset(build_fusion_dataset(corpus_->dev, corpus_->asv_tables, corpus_->cm_tables));
    }
    static void TearDownTestSuite() {
        delete corpus_;
        delete train_;
        delete dev_;
    }
    static SyntheticCorpus* corpus_;
    static FusionDataset* train_;
    static FusionDataset* dev_;
};

SyntheticCorpus* TrainOnCorpus::corpus_ = nullptr;
FusionDataset* TrainOnCorpus::train_ = nullptr;
FusionDataset* TrainOnCorpus::dev_ = nullptr;

TEST_F(TrainOnCorpus, SameSeedSameHistory) {
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.learning_rate = 1e-3;
    const auto dims = dims_for(corpus_->asv_tables, corpus_->cm_tables);
    const auto a = train(train_->items, *dev_, dims, cfg);
    const auto b = train(train_->items, *dev_, dims, cfg);
    EXPECT_EQ(a.best_params, b.best_params);
    EXPECT_EQ(history_to_csv(a.history), history_to_csv(b.history));
    ASSERT_EQ(a.history.size(), 3u);
}

TEST_F(TrainOnCorpus, ReachesLowDevEer) {
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.learning_rate = 1e-3;
    const auto dims = dims_for(corpus_->asv_tables, corpus_->cm_tables);
    const auto r = train(train_->items, *dev_, dims, cfg);
    ASSERT_GE(r.best_epoch, 1u);
    EXPECT_LT(r.history[r.best_epoch - 1].dev.sasv.eer, 0.01);

    std::vector<ScoredTrial> scored;
    const auto scores = predict_scores(r.best_params, *dev_);
    for (std::size_t i = 0; i < scores.size(); ++i) scored.push_back({dev_->labels[i], scores[i]});
    EXPECT_EQ(compute_report(scored).sasv.eer, r.history[r.best_epoch - 1].dev.sasv.eer);
}

TEST(Checkpoint, RoundTripWithAndWithoutAdam) {
    Rng rng(31);
    const auto dims = tiny_dims();
    FusionCheckpoint ck{sasv::test::random_params(dims, rng), {}};
    const auto plain = serialize_checkpoint(ck);
    EXPECT_EQ(plain.substr(0, 4), "SASV");
    const auto back = parse_checkpoint(plain);
    EXPECT_EQ(back.params, ck.params);
    EXPECT_TRUE(back.adam.empty());

    ck.adam = make_adam_state(tensors(ck.params));
    ck.adam.step = 17;
    ck.adam.m[0][0] = 0.25;
    ck.adam.v.back().back() = 1e-9;
    const auto bytes = serialize_checkpoint(ck);
    const auto again = parse_checkpoint(bytes);
    EXPECT_EQ(again.params, ck.params);
    EXPECT_EQ(again.adam, ck.adam);
    EXPECT_EQ(serialize_checkpoint(again), bytes);

    EXPECT_EQ(code_of([&] { parse_checkpoint(bytes.substr(0, bytes.size() - 3)); }), ErrorCode::TruncatedFile);
    auto wrong = bytes;
    wrong[0] = 'X';
    EXPECT_EQ(code_of([&] { parse_checkpoint(wrong); }), ErrorCode::BadMagic);
}
