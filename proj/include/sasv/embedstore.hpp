#pragma once

// Per-model embedding tables and cosine SV scoring.
//
// Binary table layout (little-endian):
//   "SVEB" | version u16 = 1 | dim u32 | count u64 |
//   count x { id_len u16 | id bytes (UTF-8) | dim x f32 }
// Text layout: one "<utt_id> v1 ... vD" line per utterance.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sasv/protocol.hpp"

namespace sasv {

inline constexpr std::uint16_t kEmbeddingFormatVersion = 1;

class EmbeddingTable {
public:
    EmbeddingTable() = default;
    EmbeddingTable(std::string model_id, std::size_t dim);

    /// Throws DimMismatch, DuplicateUtterance or ZeroVector.
    void add(const std::string& utt_id, std::vector<double> vector);

    const std::string& model_id() const { return model_id_; }
    std::size_t dim() const { return dim_; }
    std::size_t size() const { return order_.size(); }
    bool contains(std::string_view utt_id) const;

    /// Throws MissingUtterance.
    std::span<const double> at(std::string_view utt_id) const;

    /// Utterance ids in insertion (file) order.
    const std::vector<std::string>& utterance_ids() const { return order_; }

private:
    std::string model_id_;
    std::size_t dim_ = 0;
    std::vector<std::string> order_;
    std::unordered_map<std::string, std::vector<double>> entries_;
};

EmbeddingTable parse_embeddings_binary(std::string_view bytes, std::string model_id);
std::string serialize_embeddings_binary(const EmbeddingTable& table);
EmbeddingTable parse_embeddings_text(std::string_view text, std::string model_id);
std::string serialize_embeddings_text(const EmbeddingTable& table);

/// Loads the binary format; the model id is the file stem.
EmbeddingTable load_embeddings(const std::filesystem::path& path);
/// Loads the text fallback format.
EmbeddingTable load_embeddings_text(const std::filesystem::path& path);
/// Picks the text loader for ".txt" files and the binary loader otherwise.
EmbeddingTable load_embeddings_auto(const std::filesystem::path& path);
void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table);

/// dot(a,b) / (|a| |b|), clamped to [-1, 1].
double cosine_score(std::span<const double> a, std::span<const double> b);

enum class EnrollmentStrategy { MeanOfNormalized, MeanRaw, ScoreMean };

std::string_view strategy_name(EnrollmentStrategy strategy);
EnrollmentStrategy parse_strategy(std::string_view name);

struct EnrollmentAggregate {
    std::string speaker_id;
    /// Empty under ScoreMean, where aggregation happens at score level.
    std::vector<double> vector;
    EnrollmentStrategy strategy = EnrollmentStrategy::MeanOfNormalized;
};

EnrollmentAggregate aggregate_enrollment(const std::string& speaker_id, const EnrollmentMap& enrollment,
                                         const EmbeddingTable& table, EnrollmentStrategy strategy);

/// SV score of one test embedding against an enrolled speaker.
double score_against(const EnrollmentAggregate& aggregate, const EnrollmentMap& enrollment,
                     const EmbeddingTable& table, std::span<const double> test);

/// Thread-safe memo of aggregates keyed by (speaker, model index). Each key is
/// computed at most once; concurrent readers see the same value.
class AggregateCache {
public:
    const EnrollmentAggregate& get(const std::string& speaker_id, std::size_t model_index,
                                   const EnrollmentMap& enrollment, const EmbeddingTable& table,
                                   EnrollmentStrategy strategy);
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::map<std::pair<std::string, std::size_t>, EnrollmentAggregate> cache_;
};

/// rows[t][i] is the model-i SV score of trial t.
struct SvScoreMatrix {
    std::vector<std::vector<double>> rows;

    std::size_t num_trials() const { return rows.size(); }
    std::size_t num_models() const { return rows.empty() ? 0 : rows.front().size(); }
    std::vector<double> column(std::size_t model) const;
};

struct ScoringOptions {
    EnrollmentStrategy strategy = EnrollmentStrategy::MeanOfNormalized;
    std::size_t threads = 1;
    bool use_cache = true;
};

SvScoreMatrix compute_sv_scores(const ProtocolSet& protocol, std::span<const EmbeddingTable> tables,
                                const ScoringOptions& options = {});

/// Runs fn(i) for i in [0, n) on up to `threads` workers, contiguous chunks.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn);

} // namespace sasv

#include "sasv/detail/parallel.hpp"
