#pragma once

// Trial protocols and enrollment maps.
//
// Trial file:      <speaker_id> <test_utt_id> <target|nontarget|spoof>
// Enrollment file: <speaker_id> <utt_id>
//
// One record per line, any run of spaces/tabs as separator, LF or CRLF line
// endings, blank lines and lines starting with '#' ignored. Labels are
// case-insensitive on input and written in lowercase.

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace sasv {

enum class TrialLabel { Target, NonTarget, Spoof };

inline constexpr std::array<TrialLabel, 3> kAllLabels = {TrialLabel::Target, TrialLabel::NonTarget,
                                                         TrialLabel::Spoof};

std::string_view label_name(TrialLabel label);
std::optional<TrialLabel> parse_label(std::string_view token);

struct Trial {
    std::string speaker_id;
    std::string test_utt_id;
    TrialLabel label = TrialLabel::Target;

    friend bool operator==(const Trial&, const Trial&) = default;
};

/// speaker -> enrollment utterances, keeping first-seen speaker order.
class EnrollmentMap {
public:
    /// Throws DuplicateEnrollment if utt_id is already listed for speaker_id.
    void add(const std::string& speaker_id, const std::string& utt_id);

    bool contains(std::string_view speaker_id) const;
    /// Throws UnenrolledSpeaker when absent.
    const std::vector<std::string>& utterances(std::string_view speaker_id) const;

    const std::vector<std::pair<std::string, std::vector<std::string>>>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    friend bool operator==(const EnrollmentMap& a, const EnrollmentMap& b) { return a.entries_ == b.entries_; }

private:
    std::vector<std::pair<std::string, std::vector<std::string>>> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct LabelCounts {
    std::size_t target = 0;
    std::size_t nontarget = 0;
    std::size_t spoof = 0;

    std::size_t& operator[](TrialLabel label);
    std::size_t operator[](TrialLabel label) const;
    std::size_t total() const { return target + nontarget + spoof; }

    friend bool operator==(const LabelCounts&, const LabelCounts&) = default;
};

struct ProtocolSet {
    std::string partition_name;
    std::vector<Trial> trials;
    EnrollmentMap enrollment;
    LabelCounts counts;

    friend bool operator==(const ProtocolSet&, const ProtocolSet&) = default;
};

std::vector<Trial> parse_trials(std::string_view text);
EnrollmentMap parse_enrollment(std::string_view text);

/// Checks that every trial speaker is enrolled and tallies labels.
ProtocolSet validate_protocol(std::vector<Trial> trials, EnrollmentMap enrollment,
                              std::string partition_name = {});

std::string serialize_trials(const std::vector<Trial>& trials);
std::string serialize_enrollment(const EnrollmentMap& enrollment);

} // namespace sasv
