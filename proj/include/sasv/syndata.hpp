#pragma once

// Deterministic synthetic SASV corpus.
//
// ASV tables: every speaker owns a random unit direction per model; any
// utterance attributed to that speaker (bona fide or spoofed) is
// strength * direction + noise. Spoofs therefore fool the ASV models.
//
// CM tables: speaker-free. Bona fide utterances carry strength * b, spoofs
// strength * q, where b and q are unit markers on the first and second half
// of the coordinates. The CM probe score is dot(embedding, b).
//
// Noise is isotropic Gaussian with per-coordinate std noise_std / sqrt(dim),
// so its expected norm is about noise_std regardless of dim.

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "sasv/embedstore.hpp"
#include "sasv/protocol.hpp"

namespace sasv {

struct AsvModelSpec {
    std::size_t dim = 16;
    double speaker_signal_strength = 3.0;
};

struct CmModelSpec {
    std::size_t dim = 16;
    double artifact_signal_strength = 3.0;
};

struct SyntheticCorpusSpec {
    std::size_t train_speakers = 5;
    std::size_t dev_speakers = 5;
    std::size_t utts_per_speaker = 20; // bona fide, enrollment included
    std::size_t spoofs_per_speaker = 20;
    std::vector<AsvModelSpec> asv_models{AsvModelSpec{}, AsvModelSpec{}};
    std::vector<CmModelSpec> cm_models{CmModelSpec{}, CmModelSpec{}};
    double noise_std = 1.0;
    std::uint64_t seed = 0;

    /// Throws SpecInvalid.
    void validate() const;
    /// Enrollment utterances per speaker: max(1, utts_per_speaker / 5).
    std::size_t enroll_per_speaker() const;
};

struct SyntheticCorpus {
    ProtocolSet train;
    ProtocolSet dev;
    std::vector<EmbeddingTable> asv_tables;
    std::vector<EmbeddingTable> cm_tables;
    /// Per CM model: utterance id -> probe score.
    std::vector<std::unordered_map<std::string, double>> cm_probe;

    /// Probe scores of CM model `model` for each trial's test utterance.
    std::vector<double> cm_scores(const ProtocolSet& protocol, std::size_t model = 0) const;
};

SyntheticCorpus generate(const SyntheticCorpusSpec& spec);

} // namespace sasv
