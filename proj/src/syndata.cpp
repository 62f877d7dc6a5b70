#include "sasv/syndata.hpp"

#include <cmath>
#include <cstdio>

#include "sasv/error.hpp"
#include "sasv/rng.hpp"

namespace sasv {

void SyntheticCorpusSpec::validate() const {
    auto invalid = [](const std::string& why) { throw Error(ErrorCode::SpecInvalid, why); };
    if (train_speakers < 2 || dev_speakers < 2) invalid("each partition needs at least 2 speakers");
    if (utts_per_speaker < 2) invalid("utts_per_speaker must be at least 2");
    if (spoofs_per_speaker < 1) invalid("spoofs_per_speaker must be at least 1");
    if (asv_models.empty()) invalid("at least one ASV model is required");
    if (cm_models.empty()) invalid("at least one CM model is required");
    if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) invalid("noise_std must be finite and >= 0");
    for (const auto& m : asv_models) {
        if (m.dim < 2) invalid("ASV dim must be >= 2, got " + std::to_string(m.dim));
        if (!(m.speaker_signal_strength >= 0.0)) invalid("speaker signal strength must be >= 0");
        if (m.speaker_signal_strength == 0.0 && noise_std == 0.0) invalid("ASV model would emit zero vectors");
    }
    for (const auto& m : cm_models) {
        if (m.dim < 2) invalid("CM dim must be >= 2, got " + std::to_string(m.dim));
        if (!(m.artifact_signal_strength >= 0.0)) invalid("artifact signal strength must be >= 0");
        if (m.artifact_signal_strength == 0.0 && noise_std == 0.0) invalid("CM model would emit zero vectors");
    }
}

std::size_t SyntheticCorpusSpec::enroll_per_speaker() const { return std::max<std::size_t>(1, utts_per_speaker / 5); }

std::vector<double> SyntheticCorpus::cm_scores(const ProtocolSet& protocol, std::size_t model) const {
    std::vector<double> out;
    out.reserve(protocol.trials.size());
    for (const auto& t : protocol.trials) {
        auto it = cm_probe.at(model).find(t.test_utt_id);
        if (it == cm_probe.at(model).end()) {
            throw Error(ErrorCode::MissingUtterance, "no probe score for " + t.test_utt_id);
        }
        out.push_back(it->second);
    }
    return out;
}

namespace {

std::string indexed(const std::string& prefix, std::size_t i) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%03zu", i);
    return prefix + buf;
}

Rng entity_rng(std::uint64_t seed, const std::string& key) { return Rng(derive_seed(seed, stable_hash(key))); }

std::vector<double> unit_gaussian(Rng& rng, std::size_t dim, std::size_t lo, std::size_t hi) {
    std::vector<double> v(dim, 0.0);
    double sq = 0.0;
    do {
        sq = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            v[i] = rng.normal();
            sq += v[i] * v[i];
        }
    } while (sq == 0.0);
    const double norm = std::sqrt(sq);
    for (std::size_t i = lo; i < hi; ++i) v[i] /= norm;
    return v;
}

std::vector<double> signal_plus_noise(const std::vector<double>& direction, double strength, double noise_std,
                                      Rng& rng) {
    const double sigma = noise_std / std::sqrt(static_cast<double>(direction.size()));
    std::vector<double> v(direction.size());
    // Rounded through f32 so in-memory tables equal their on-disk form.
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = static_cast<double>(static_cast<float>(strength * direction[i] + sigma * rng.normal()));
    }
    return v;
}

struct Speaker {
    std::string id;
    std::vector<std::string> bona_fide;
    std::vector<std::string> spoofs;
};

std::vector<Speaker> make_speakers(const SyntheticCorpusSpec& spec, const std::string& prefix, std::size_t count) {
    std::vector<Speaker> speakers;
    for (std::size_t s = 0; s < count; ++s) {
        Speaker spk{indexed(prefix + "_spk", s), {}, {}};
        for (std::size_t u = 0; u < spec.utts_per_speaker; ++u) spk.bona_fide.push_back(indexed(spk.id + "_bf", u));
        for (std::size_t u = 0; u < spec.spoofs_per_speaker; ++u) spk.spoofs.push_back(indexed(spk.id + "_sp", u));
        speakers.push_back(std::move(spk));
    }
    return speakers;
}

ProtocolSet make_protocol(const SyntheticCorpusSpec& spec, const std::vector<Speaker>& speakers,
                          const std::string& partition) {
    const std::size_t enroll = spec.enroll_per_speaker();
    const std::size_t tests = spec.utts_per_speaker - enroll;
    EnrollmentMap enrollment;
    std::vector<Trial> trials;
    for (std::size_t k = 0; k < speakers.size(); ++k) {
        const auto& spk = speakers[k];
        for (std::size_t u = 0; u < enroll; ++u) enrollment.add(spk.id, spk.bona_fide[u]);
        for (std::size_t j = 0; j < tests; ++j) trials.push_back({spk.id, spk.bona_fide[enroll + j], TrialLabel::Target});
        // Cycle over the other speakers, one test utterance each.
        for (std::size_t j = 0; j < tests; ++j) {
            const auto& other = speakers[(k + 1 + j % (speakers.size() - 1)) % speakers.size()];
            trials.push_back({spk.id, other.bona_fide[enroll + j], TrialLabel::NonTarget});
        }
        for (const auto& utt : spk.spoofs) trials.push_back({spk.id, utt, TrialLabel::Spoof});
    }
    return validate_protocol(std::move(trials), std::move(enrollment), partition);
}

} // namespace

SyntheticCorpus generate(const SyntheticCorpusSpec& spec) {
    spec.validate();
    const auto train_speakers = make_speakers(spec, "trn", spec.train_speakers);
    const auto dev_speakers = make_speakers(spec, "dev", spec.dev_speakers);

    SyntheticCorpus corpus;
    corpus.train = make_protocol(spec, train_speakers, "train");
    corpus.dev = make_protocol(spec, dev_speakers, "dev");

    std::vector<const Speaker*> all;
    for (const auto& s : train_speakers) all.push_back(&s);
    for (const auto& s : dev_speakers) all.push_back(&s);

    for (std::size_t m = 0; m < spec.asv_models.size(); ++m) {
        const auto& model = spec.asv_models[m];
        const std::string tag = "asv" + std::to_string(m);
        EmbeddingTable table(tag, model.dim);
        for (const Speaker* spk : all) {
            auto dir_rng = entity_rng(spec.seed, tag + "/dir/" + spk->id);
            const auto direction = unit_gaussian(dir_rng, model.dim, 0, model.dim);
            for (const auto* utts : {&spk->bona_fide, &spk->spoofs}) {
                for (const auto& utt : *utts) {
                    auto rng = entity_rng(spec.seed, tag + "/utt/" + utt);
                    table.add(utt, signal_plus_noise(direction, model.speaker_signal_strength, spec.noise_std, rng));
                }
            }
        }
        corpus.asv_tables.push_back(std::move(table));
    }

    for (std::size_t m = 0; m < spec.cm_models.size(); ++m) {
        const auto& model = spec.cm_models[m];
        const std::string tag = "cm" + std::to_string(m);
        const std::size_t half = (model.dim + 1) / 2;
        auto marker_rng = entity_rng(spec.seed, tag + "/markers");
        const auto bona_marker = unit_gaussian(marker_rng, model.dim, 0, half);
        const auto spoof_marker = unit_gaussian(marker_rng, model.dim, half, model.dim);

        EmbeddingTable table(tag, model.dim);
        std::unordered_map<std::string, double> probe;
        for (const Speaker* spk : all) {
            for (const auto* utts : {&spk->bona_fide, &spk->spoofs}) {
                const auto& marker = utts == &spk->bona_fide ? bona_marker : spoof_marker;
                for (const auto& utt : *utts) {
                    auto rng = entity_rng(spec.seed, tag + "/utt/" + utt);
                    table.add(utt, signal_plus_noise(marker, model.artifact_signal_strength, spec.noise_std, rng));
                    const auto stored = table.at(utt);
                    double dot = 0.0;
                    for (std::size_t i = 0; i < model.dim; ++i) dot += stored[i] * bona_marker[i];
                    probe.emplace(utt, dot);
                }
            }
        }
        corpus.cm_tables.push_back(std::move(table));
        corpus.cm_probe.push_back(std::move(probe));
    }
    return corpus;
}

} // namespace sasv
