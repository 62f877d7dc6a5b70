#include "sasv/embedstore.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include "sasv/binary_io.hpp"
#include "sasv/error.hpp"

namespace sasv {

namespace {

constexpr std::string_view kMagic = "SVEB";

[[noreturn]] void missing(std::string_view utt_id, const std::string& model_id) {
    throw Error(ErrorCode::MissingUtterance,
                "utterance " + std::string(utt_id) + " not in table '" + model_id + "'");
}

} // namespace

EmbeddingTable::EmbeddingTable(std::string model_id, std::size_t dim) : model_id_(std::move(model_id)), dim_(dim) {
    if (dim_ == 0) throw Error(ErrorCode::InvalidArgument, "embedding dim must be positive");
}

void EmbeddingTable::add(const std::string& utt_id, std::vector<double> vector) {
    if (vector.size() != dim_) {
        throw Error(ErrorCode::DimMismatch, "record " + std::to_string(order_.size()) + " (" + utt_id + ") has " +
                                                std::to_string(vector.size()) + " values, expected " +
                                                std::to_string(dim_));
    }
    if (std::all_of(vector.begin(), vector.end(), [](double v) { return v == 0.0; })) {
        throw Error(ErrorCode::ZeroVector, "utterance " + utt_id);
    }
    if (!entries_.try_emplace(utt_id, std::move(vector)).second) {
        throw Error(ErrorCode::DuplicateUtterance, "utterance " + utt_id + " in table '" + model_id_ + "'");
    }
    order_.push_back(utt_id);
}

bool EmbeddingTable::contains(std::string_view utt_id) const {
    return entries_.find(std::string(utt_id)) != entries_.end();
}

std::span<const double> EmbeddingTable::at(std::string_view utt_id) const {
    auto it = entries_.find(std::string(utt_id));
    if (it == entries_.end()) missing(utt_id, model_id_);
    return it->second;
}

EmbeddingTable parse_embeddings_binary(std::string_view bytes, std::string model_id) {
    io::ByteReader in(bytes);
    if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic) {
        throw Error(ErrorCode::BadMagic, "expected SVEB header in '" + model_id + "'");
    }
    in.get_bytes(kMagic.size());
    const auto version = in.get<std::uint16_t>();
    if (version != kEmbeddingFormatVersion) {
        throw Error(ErrorCode::BadMagic, "unsupported embedding format version " + std::to_string(version));
    }
    const auto dim = in.get<std::uint32_t>();
    const auto count = in.get<std::uint64_t>();
    if (dim == 0) throw Error(ErrorCode::DimMismatch, "header declares dim 0");

    EmbeddingTable table(std::move(model_id), dim);
    for (std::uint64_t r = 0; r < count; ++r) {
        const auto id_len = in.get<std::uint16_t>();
        std::string utt_id(in.get_bytes(id_len));
        std::vector<double> values(dim);
        for (auto& v : values) v = static_cast<double>(in.get<float>());
        table.add(utt_id, std::move(values));
    }
    if (!in.at_end()) {
        throw Error(ErrorCode::DimMismatch, "record " + std::to_string(count) + ": " +
                                                std::to_string(in.remaining()) + " trailing bytes after last record");
    }
    return table;
}

std::string serialize_embeddings_binary(const EmbeddingTable& table) {
    io::ByteWriter out;
    out.put_bytes(kMagic);
    out.put<std::uint16_t>(kEmbeddingFormatVersion);
    out.put<std::uint32_t>(static_cast<std::uint32_t>(table.dim()));
    out.put<std::uint64_t>(table.size());
    for (const auto& id : table.utterance_ids()) {
        if (id.size() > 0xFFFF) throw Error(ErrorCode::InvalidArgument, "utterance id too long: " + id);
        out.put<std::uint16_t>(static_cast<std::uint16_t>(id.size()));
        out.put_bytes(id);
        for (double v : table.at(id)) out.put<float>(static_cast<float>(v));
    }
    return out.take();
}

EmbeddingTable parse_embeddings_text(std::string_view text, std::string model_id) {
    std::vector<std::pair<std::string, std::vector<double>>> rows;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;

        std::vector<std::string_view> fields;
        std::size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
            std::size_t start = i;
            while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
            if (i > start) fields.push_back(line.substr(start, i - start));
        }
        if (fields.empty() || fields.front().front() == '#') continue;
        if (fields.size() < 2) {
            throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": no values");
        }
        std::vector<double> values;
        for (std::size_t f = 1; f < fields.size(); ++f) {
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(fields[f].data(), fields[f].data() + fields[f].size(), v);
            if (ec != std::errc() || ptr != fields[f].data() + fields[f].size() || !std::isfinite(v)) {
                throw Error(ErrorCode::MalformedLine,
                            "line " + std::to_string(line_no) + ": bad value '" + std::string(fields[f]) + "'");
            }
            values.push_back(v);
        }
        rows.emplace_back(std::string(fields[0]), std::move(values));
    }
    if (rows.empty()) throw Error(ErrorCode::EmptyInput, "text embedding file '" + model_id + "' has no records");

    EmbeddingTable table(std::move(model_id), rows.front().second.size());
    for (auto& [id, values] : rows) table.add(id, std::move(values));
    return table;
}

std::string serialize_embeddings_text(const EmbeddingTable& table) {
    std::string out;
    char buf[64];
    for (const auto& id : table.utterance_ids()) {
        out += id;
        for (double v : table.at(id)) {
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
            out += ' ';
            out.append(buf, ptr);
        }
        out += '\n';
    }
    return out;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
    return parse_embeddings_binary(io::read_file(path), path.stem().string());
}

EmbeddingTable load_embeddings_text(const std::filesystem::path& path) {
    return parse_embeddings_text(io::read_file(path), path.stem().string());
}

EmbeddingTable load_embeddings_auto(const std::filesystem::path& path) {
    return path.extension() == ".txt" ? load_embeddings_text(path) : load_embeddings(path);
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table) {
    io::write_file(path, serialize_embeddings_binary(table));
}

double cosine_score(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::LengthMismatch,
                    "cosine of lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::ZeroNorm, "cosine of a zero vector");
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::string_view strategy_name(EnrollmentStrategy strategy) {
    switch (strategy) {
    case EnrollmentStrategy::MeanOfNormalized: return "mean-of-normalized";
    case EnrollmentStrategy::MeanRaw: return "mean-raw";
    case EnrollmentStrategy::ScoreMean: return "score-mean";
    }
    return "unknown";
}

EnrollmentStrategy parse_strategy(std::string_view name) {
    for (auto s : {EnrollmentStrategy::MeanOfNormalized, EnrollmentStrategy::MeanRaw, EnrollmentStrategy::ScoreMean}) {
        if (name == strategy_name(s)) return s;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown enrollment strategy '" + std::string(name) + "'");
}

namespace {

void normalize_in_place(std::vector<double>& v) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    if (sq == 0.0) throw Error(ErrorCode::ZeroNorm, "cannot normalize a zero vector");
    const double norm = std::sqrt(sq);
    for (double& x : v) x /= norm;
}

} // namespace

EnrollmentAggregate aggregate_enrollment(const std::string& speaker_id, const EnrollmentMap& enrollment,
                                         const EmbeddingTable& table, EnrollmentStrategy strategy) {
    const auto& utts = enrollment.utterances(speaker_id);
    for (const auto& utt : utts) {
        if (!table.contains(utt)) missing(utt, table.model_id());
    }
    EnrollmentAggregate agg{speaker_id, {}, strategy};
    if (strategy == EnrollmentStrategy::ScoreMean) return agg;

    agg.vector.assign(table.dim(), 0.0);
    for (const auto& utt : utts) {
        std::vector<double> v(table.at(utt).begin(), table.at(utt).end());
        if (strategy == EnrollmentStrategy::MeanOfNormalized) normalize_in_place(v);
        for (std::size_t i = 0; i < v.size(); ++i) agg.vector[i] += v[i];
    }
    for (double& x : agg.vector) x /= static_cast<double>(utts.size());
    if (strategy == EnrollmentStrategy::MeanOfNormalized) normalize_in_place(agg.vector);
    return agg;
}

double score_against(const EnrollmentAggregate& aggregate, const EnrollmentMap& enrollment,
                     const EmbeddingTable& table, std::span<const double> test) {
    if (aggregate.strategy != EnrollmentStrategy::ScoreMean) return cosine_score(aggregate.vector, test);

    const auto& utts = enrollment.utterances(aggregate.speaker_id);
    double sum = 0.0;
    for (const auto& utt : utts) sum += cosine_score(table.at(utt), test);
    return sum / static_cast<double>(utts.size());
}

const EnrollmentAggregate& AggregateCache::get(const std::string& speaker_id, std::size_t model_index,
                                               const EnrollmentMap& enrollment, const EmbeddingTable& table,
                                               EnrollmentStrategy strategy) {
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(speaker_id, model_index);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
        it = cache_.emplace(std::move(key), aggregate_enrollment(speaker_id, enrollment, table, strategy)).first;
    }
    return it->second;
}

std::size_t AggregateCache::size() const {
    std::lock_guard lock(mutex_);
    return cache_.size();
}

std::vector<double> SvScoreMatrix::column(std::size_t model) const {
    std::vector<double> col;
    col.reserve(rows.size());
    for (const auto& row : rows) col.push_back(row.at(model));
    return col;
}

SvScoreMatrix compute_sv_scores(const ProtocolSet& protocol, std::span<const EmbeddingTable> tables,
                                const ScoringOptions& options) {
    SvScoreMatrix out;
    out.rows.assign(protocol.trials.size(), std::vector<double>(tables.size(), 0.0));
    AggregateCache cache;
    parallel_for(protocol.trials.size(), options.threads, [&](std::size_t t) {
        const Trial& trial = protocol.trials[t];
        for (std::size_t m = 0; m < tables.size(); ++m) {
            const auto test = tables[m].at(trial.test_utt_id);
            if (options.use_cache) {
                const auto& agg = cache.get(trial.speaker_id, m, protocol.enrollment, tables[m], options.strategy);
                out.rows[t][m] = score_against(agg, protocol.enrollment, tables[m], test);
            } else {
                const auto agg = aggregate_enrollment(trial.speaker_id, protocol.enrollment, tables[m], options.strategy);
                out.rows[t][m] = score_against(agg, protocol.enrollment, tables[m], test);
            }
        }
    });
    return out;
}

} // namespace sasv
