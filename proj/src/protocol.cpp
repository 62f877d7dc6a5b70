#include "sasv/protocol.hpp"

#include <algorithm>
#include <cctype>

#include "sasv/error.hpp"

namespace sasv {

std::string_view label_name(TrialLabel label) {
    switch (label) {
    case TrialLabel::Target: return "target";
    case TrialLabel::NonTarget: return "nontarget";
    case TrialLabel::Spoof: return "spoof";
    }
    return "unknown";
}

std::optional<TrialLabel> parse_label(std::string_view token) {
    std::string lower(token);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (TrialLabel label : kAllLabels) {
        if (lower == label_name(label)) return label;
    }
    return std::nullopt;
}

std::size_t& LabelCounts::operator[](TrialLabel label) {
    switch (label) {
    case TrialLabel::Target: return target;
    case TrialLabel::NonTarget: return nontarget;
    case TrialLabel::Spoof: break;
    }
    return spoof;
}

std::size_t LabelCounts::operator[](TrialLabel label) const {
    return const_cast<LabelCounts&>(*this)[label];
}

void EnrollmentMap::add(const std::string& speaker_id, const std::string& utt_id) {
    auto [it, inserted] = index_.try_emplace(speaker_id, entries_.size());
    if (inserted) {
        entries_.emplace_back(speaker_id, std::vector<std::string>{utt_id});
        return;
    }
    auto& utts = entries_[it->second].second;
    if (std::find(utts.begin(), utts.end(), utt_id) != utts.end()) {
        throw Error(ErrorCode::DuplicateEnrollment, "speaker " + speaker_id + " lists " + utt_id + " twice");
    }
    utts.push_back(utt_id);
}

bool EnrollmentMap::contains(std::string_view speaker_id) const {
    return index_.find(std::string(speaker_id)) != index_.end();
}

const std::vector<std::string>& EnrollmentMap::utterances(std::string_view speaker_id) const {
    auto it = index_.find(std::string(speaker_id));
    if (it == index_.end()) {
        throw Error(ErrorCode::UnenrolledSpeaker, "speaker " + std::string(speaker_id) + " has no enrollment");
    }
    return entries_[it->second].second;
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && is_space(line[i])) ++i;
        std::size_t start = i;
        while (i < line.size() && !is_space(line[i])) ++i;
        if (i > start) fields.push_back(line.substr(start, i - start));
    }
    return fields;
}

// Calls fn(line_no, fields) for every non-blank, non-comment line.
template <typename Fn>
void for_each_record(std::string_view text, Fn&& fn) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;

        auto fields = split_fields(line);
        if (fields.empty() || fields.front().front() == '#') continue;
        fn(line_no, fields);
    }
}

[[noreturn]] void malformed(std::size_t line_no, const std::string& why) {
    throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": " + why);
}

} // namespace

std::vector<Trial> parse_trials(std::string_view text) {
    std::vector<Trial> trials;
    for_each_record(text, [&](std::size_t line_no, const std::vector<std::string_view>& fields) {
        if (fields.size() != 3) {
            malformed(line_no, "expected 3 fields, got " + std::to_string(fields.size()));
        }
        auto label = parse_label(fields[2]);
        if (!label) malformed(line_no, "unknown label '" + std::string(fields[2]) + "'");
        trials.push_back(Trial{std::string(fields[0]), std::string(fields[1]), *label});
    });
    return trials;
}

EnrollmentMap parse_enrollment(std::string_view text) {
    EnrollmentMap map;
    for_each_record(text, [&](std::size_t line_no, const std::vector<std::string_view>& fields) {
        if (fields.size() != 2) {
            malformed(line_no, "expected 2 fields, got " + std::to_string(fields.size()));
        }
        map.add(std::string(fields[0]), std::string(fields[1]));
    });
    return map;
}

ProtocolSet validate_protocol(std::vector<Trial> trials, EnrollmentMap enrollment, std::string partition_name) {
    ProtocolSet set;
    for (std::size_t i = 0; i < trials.size(); ++i) {
        if (!enrollment.contains(trials[i].speaker_id)) {
            throw Error(ErrorCode::UnenrolledSpeaker,
                        "speaker " + trials[i].speaker_id + " (first at trial " + std::to_string(i) + ")");
        }
        ++set.counts[trials[i].label];
    }
    set.partition_name = std::move(partition_name);
    set.trials = std::move(trials);
    set.enrollment = std::move(enrollment);
    return set;
}

std::string serialize_trials(const std::vector<Trial>& trials) {
    std::string out;
    for (const auto& t : trials) {
        out += t.speaker_id;
        out += ' ';
        out += t.test_utt_id;
        out += ' ';
        out += label_name(t.label);
        out += '\n';
    }
    return out;
}

std::string serialize_enrollment(const EnrollmentMap& enrollment) {
    std::string out;
    for (const auto& [speaker, utts] : enrollment.entries()) {
        for (const auto& utt : utts) {
            out += speaker;
            out += ' ';
            out += utt;
            out += '\n';
        }
    }
    return out;
}

} // namespace sasv
