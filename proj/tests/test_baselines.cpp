#include <gtest/gtest.h>

#include "sasv/baselines.hpp"
#include "sasv/rng.hpp"
#include "sasv/syndata.hpp"
#include "test_util.hpp"

using namespace sasv;
using sasv::test::code_of;

TEST(Baseline1, Examples) {
    EXPECT_EQ(baseline1_score(0.9, 0.0), 0.9);
    EXPECT_EQ(baseline1_score(0.5, -20.0), -19.5);
}

TEST(Baseline1Property, AdditionAndShiftInvariance) {
    Rng rng(1);
    std::vector<double> sv(90), cm(90);
    std::vector<TrialLabel> labels(90);
    for (std::size_t i = 0; i < sv.size(); ++i) {
        sv[i] = rng.uniform(-1, 1);
        cm[i] = rng.uniform(-20, 15);
        labels[i] = kAllLabels[i % 3];
        EXPECT_EQ(baseline1_score(sv[i], cm[i]), baseline1_score(cm[i], sv[i]));
        EXPECT_EQ(baseline1_score(sv[i], cm[i]), sv[i] + cm[i]);
    }
    const auto fused = baseline1_scores(sv, cm);
    std::vector<double> shifted_sv = sv;
    for (auto& x : shifted_sv) x += 0.25;
    const auto base = scale_domination_demo(sv, cm, labels, 1.0);
    const auto shifted = scale_domination_demo(shifted_sv, cm, labels, 1.0);
    EXPECT_NEAR(base.eer_before, shifted.eer_before, 1e-12);
    EXPECT_EQ(fused.size(), sv.size());
    std::vector<double> short_cm(3);
    EXPECT_EQ(code_of([&] { baseline1_scores(sv, short_cm); }), ErrorCode::ShapeMismatch);
}

TEST(ScaleDomination, UnitScaleIsIdentity) {
    const auto c = generate(SyntheticCorpusSpec{});
    const auto sv = compute_sv_scores(c.dev, c.asv_tables).column(0);
    const auto cm = c.cm_scores(c.dev);
    std::vector<TrialLabel> labels;
    for (const auto& t : c.dev.trials) labels.push_back(t.label);
    const auto r = scale_domination_demo(sv, cm, labels, 1.0);
    EXPECT_EQ(r.eer_before, r.eer_after);
}

TEST(ScaleDomination, NoisyCmDominatesWhenScaled) {
    // SV separates targets from nontargets; CM carries only noise.
    Rng rng(2);
    std::vector<double> sv, cm;
    std::vector<TrialLabel> labels;
    for (int i = 0; i < 300; ++i) {
        const auto label = kAllLabels[i % 3];
        labels.push_back(label);
        sv.push_back(label == TrialLabel::NonTarget ? rng.uniform(-1, 0) : rng.uniform(0.2, 1));
        cm.push_back(rng.uniform(-1, 1) * 0.1 + (label == TrialLabel::Spoof ? -0.5 : 0.0));
    }
    const auto r = scale_domination_demo(sv, cm, labels, 20.0);
    EXPECT_GE(r.eer_after, r.eer_before);
    EXPECT_GT(r.eer_after, 0.1);
}

TEST(ScaleDomination, PerfectCmKeepsSpoofSeparation) {
    Rng rng(3);
    std::vector<double> sv, cm;
    std::vector<TrialLabel> labels;
    for (int i = 0; i < 300; ++i) {
        const auto label = kAllLabels[i % 3];
        labels.push_back(label);
        sv.push_back(rng.uniform(-1, 1));
        cm.push_back(label == TrialLabel::Spoof ? rng.uniform(-3, -2) : rng.uniform(2, 3));
    }
    auto spf_eer = [&](double scale) {
        std::vector<ScoredTrial> scored;
        for (std::size_t i = 0; i < sv.size(); ++i) {
            scored.push_back({labels[i], baseline1_score(sv[i], scale * cm[i])});
        }
        return compute_report(scored).spf.eer;
    };
    const double before = spf_eer(1.0);
    for (double scale : {2.0, 5.0, 20.0, 100.0}) EXPECT_LE(spf_eer(scale), before);
    EXPECT_EQ(spf_eer(20.0), 0.0);
}

namespace {

struct SmallCorpus {
    SyntheticCorpus corpus = generate(SyntheticCorpusSpec{});
    std::vector<TrialLabel> dev_labels() const {
        std::vector<TrialLabel> out;
        for (const auto& t : corpus.dev.trials) out.push_back(t.label);
        return out;
    }
};

} // namespace

TEST(Baseline2, InputLayoutAndShapes) {
    SmallCorpus s;
    const auto& asv = s.corpus.asv_tables[0];
    const auto items = baseline2_inputs(s.corpus.dev, asv, s.corpus.cm_tables[0]);
    ASSERT_EQ(items.size(), s.corpus.dev.trials.size());
    EXPECT_EQ(items[0].input.size(), 2 * asv.dim() + s.corpus.cm_tables[0].dim());
    const auto& trial = s.corpus.dev.trials[0];
    const auto test_vec = asv.at(trial.test_utt_id);
    for (std::size_t d = 0; d < asv.dim(); ++d) EXPECT_EQ(items[0].input[asv.dim() + d], test_vec[d]);
    EXPECT_EQ(items[0].label, trial.label == TrialLabel::Target ? 1 : 0);

    EXPECT_EQ(code_of([&] {
                  baseline2_inputs(s.corpus.dev, asv, s.corpus.cm_tables[0], EnrollmentStrategy::ScoreMean);
              }),
              ErrorCode::InvalidArgument);
}

TEST(Baseline2, ZeroEpochsIsNearChance) {
    // Balanced random data: inputs carry no label information.
    Rng rng(5);
    std::vector<Baseline2Item> items(2000);
    std::vector<TrialLabel> labels(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        items[i].input.resize(2 * 4 + 3);
        for (auto& x : items[i].input) x = rng.normal();
        labels[i] = i % 2 == 0 ? TrialLabel::Target : (i % 4 == 1 ? TrialLabel::NonTarget : TrialLabel::Spoof);
        items[i].label = labels[i] == TrialLabel::Target ? 1 : 0;
    }
    TrainConfig cfg;
    cfg.epochs = 0;
    const auto r = train_baseline2(items, items, labels, 4, 3, cfg);
    EXPECT_TRUE(r.history.empty());
    std::vector<ScoredTrial> scored;
    for (std::size_t i = 0; i < items.size(); ++i) {
        scored.push_back({labels[i], baseline2_score(r.best_params, items[i].input)});
    }
    const double eer = compute_report(scored).sasv.eer;
    EXPECT_GE(eer, 0.40);
    EXPECT_LE(eer, 0.60);
}

TEST(Baseline2, Deterministic) {
    SmallCorpus s;
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.learning_rate = 1e-3;
    cfg.seed = 4;
    const auto a = baseline2_model(s.corpus.asv_tables[0], s.corpus.cm_tables[0], s.corpus.train, s.corpus.dev, cfg);
    const auto b = baseline2_model(s.corpus.asv_tables[0], s.corpus.cm_tables[0], s.corpus.train, s.corpus.dev, cfg);
    EXPECT_EQ(a.training.best_params, b.training.best_params);
    EXPECT_EQ(a.dev_scores, b.dev_scores);
    EXPECT_EQ(history_to_csv(a.training.history), history_to_csv(b.training.history));
}

TEST(Baseline2, SvOnlyWhenCmDimIsZero) {
    Rng rng(6);
    std::vector<Baseline2Item> items(40);
    std::vector<TrialLabel> labels(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        items[i].input.resize(2 * 3);
        for (auto& x : items[i].input) x = rng.normal();
        labels[i] = kAllLabels[i % 3];
        items[i].label = labels[i] == TrialLabel::Target ? 1 : 0;
    }
    TrainConfig cfg;
    cfg.epochs = 2;
    const auto r = train_baseline2(items, items, labels, 3, 0, cfg);
    EXPECT_EQ(r.best_params.cm_dim, 0u);
    EXPECT_EQ(r.best_params.net.front().inputs, 6u);
    EXPECT_EQ(r.history.size(), 2u);
}

TEST(Baseline2, LossGradientMatchesFiniteDifferences) {
    Rng rng(8);
    const std::size_t hidden[] = {4, 3};
    auto params = init_baseline2(2, 1, hidden, 3);
    for (auto t : tensors(params)) {
        for (auto& x : t) x += rng.uniform(-0.3, 0.3);
    }
    std::vector<Baseline2Item> batch(3);
    for (auto& it : batch) {
        it.input = {rng.normal(), rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        it.label = int(rng.below(2));
    }
    auto analytic = baseline2_loss(params, batch).gradients;
    auto g = tensors(analytic);
    auto p = tensors(params);
    const double h = 1e-5;
    for (std::size_t t = 0; t < p.size(); ++t) {
        for (std::size_t i = 0; i < p[t].size(); ++i) {
            const double saved = p[t][i];
            p[t][i] = saved + h;
            const double up = baseline2_loss(params, batch).loss;
            p[t][i] = saved - h;
            const double down = baseline2_loss(params, batch).loss;
            p[t][i] = saved;
            const double numeric = (up - down) / (2 * h);
            EXPECT_LT(std::abs(numeric - g[t][i]) / std::max({std::abs(numeric), std::abs(g[t][i]), 1e-3}), 1e-5);
        }
    }
}

TEST(Baseline2, CheckpointRoundTrip) {
    const std::size_t hidden[] = {5, 4, 3};
    Baseline2Checkpoint ck{init_baseline2(6, 2, hidden, 12), {}};
    ck.adam = make_adam_state(tensors(ck.params));
    ck.adam.step = 3;
    ck.adam.v[1][0] = 0.5;
    const auto bytes = serialize_baseline2(ck);
    EXPECT_EQ(bytes.substr(0, 4), "SB2N");
    const auto back = parse_baseline2(bytes);
    EXPECT_EQ(back.params, ck.params);
    EXPECT_EQ(back.adam, ck.adam);
    EXPECT_EQ(serialize_baseline2(back), bytes);
    EXPECT_EQ(code_of([&] { parse_baseline2("SASV" + bytes.substr(4)); }), ErrorCode::BadMagic);
}

// Baseline2 has to learn a speaker comparison from raw embeddings, so it needs
// more training speakers than the default corpus offers before it approaches
// the proposed model.
TEST(Baseline2, CloseToProposedAndFarBelowScaledBaseline1) {
    SyntheticCorpusSpec spec;
    spec.train_speakers = 40;
    spec.noise_std = 0.7;
    const auto c = generate(spec);

    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.epochs = 10;
    const auto b2 = baseline2_model(c.asv_tables[0], c.cm_tables[0], c.train, c.dev, cfg);
    const double b2_eer = b2.training.history[b2.training.best_epoch - 1].dev.sasv.eer;

    const auto train_set = build_fusion_dataset(c.train, c.asv_tables, c.cm_tables);
    const auto dev_set = build_fusion_dataset(c.dev, c.asv_tables, c.cm_tables);
    const auto proposed = train(train_set.items, dev_set, dims_for(c.asv_tables, c.cm_tables), cfg);
    const double proposed_eer = proposed.history[proposed.best_epoch - 1].dev.sasv.eer;

    std::vector<TrialLabel> labels;
    for (const auto& t : c.dev.trials) labels.push_back(t.label);
    const auto sv = compute_sv_scores(c.dev, c.asv_tables).column(0);
    const auto b1 = scale_domination_demo(sv, c.cm_scores(c.dev), labels, 20.0);

    EXPECT_LT(b2_eer, proposed_eer + 0.02);
    EXPECT_GT(b1.eer_after, b2_eer + 0.05);
    EXPECT_GT(b1.eer_after, proposed_eer + 0.05);
}
