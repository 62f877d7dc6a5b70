#include <gtest/gtest.h>

#include "sasv/error.hpp"
#include "sasv/protocol.hpp"
#include "sasv/rng.hpp"
#include "test_util.hpp"

using namespace sasv;

using sasv::test::code_of;

TEST(ParseTrials, SingleLine) {
    auto trials = parse_trials("spk1 utt9 target");
    ASSERT_EQ(trials.size(), 1u);
    EXPECT_EQ(trials[0], (Trial{"spk1", "utt9", TrialLabel::Target}));
}

TEST(ParseTrials, SkipsCommentsAndBlankLinesAndFoldsCase) {
    auto trials = parse_trials("# hdr\n\nspk1 u1 SPOOF");
    ASSERT_EQ(trials.size(), 1u);
    EXPECT_EQ(trials[0], (Trial{"spk1", "u1", TrialLabel::Spoof}));
}

TEST(ParseTrials, UnknownLabelReportsLineNumber) {
    try {
        parse_trials("spk1 u1 bonafide");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MalformedLine);
        EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
    }
}

TEST(ParseTrials, WrongFieldCountCountsSkippedLines) {
    try {
        parse_trials("# c\n\na b target\na b\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MalformedLine);
        EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos);
    }
    EXPECT_EQ(code_of([] { parse_trials("a b target extra"); }), ErrorCode::MalformedLine);
}

TEST(ParseTrials, AcceptsCrlfTabsAndRuns) {
    auto trials = parse_trials("s1\tu1   NonTarget\r\ns2 u2 target\r\n");
    ASSERT_EQ(trials.size(), 2u);
    EXPECT_EQ(trials[0], (Trial{"s1", "u1", TrialLabel::NonTarget}));
    EXPECT_EQ(trials[1], (Trial{"s2", "u2", TrialLabel::Target}));
}

TEST(ParseTrials, DuplicatesAreKept) {
    auto trials = parse_trials("s u target\ns u target\n");
    EXPECT_EQ(trials.size(), 2u);
}

TEST(ParseEnrollment, GroupsInFirstSeenOrder) {
    auto map = parse_enrollment("s1 a\ns2 c\ns1 b");
    ASSERT_EQ(map.size(), 2u);
    EXPECT_EQ(map.entries()[0].first, "s1");
    EXPECT_EQ(map.utterances("s1"), (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(map.utterances("s2"), (std::vector<std::string>{"c"}));
}

TEST(ParseEnrollment, Duplicate) {
    try {
        parse_enrollment("s1 a\ns1 a");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DuplicateEnrollment);
        EXPECT_NE(std::string(e.what()).find("s1"), std::string::npos);
    }
}

TEST(ParseEnrollment, EmptyAndMalformed) {
    EXPECT_TRUE(parse_enrollment("").empty());
    EXPECT_EQ(code_of([] { parse_enrollment("s1 a b"); }), ErrorCode::MalformedLine);
}

TEST(ValidateProtocol, CountsLabels) {
    EnrollmentMap e;
    e.add("s1", "a");
    auto set = validate_protocol({{"s1", "u", TrialLabel::Target}}, e, "dev");
    EXPECT_EQ(set.counts.target, 1u);
    EXPECT_EQ(set.counts.total(), 1u);
    EXPECT_EQ(set.partition_name, "dev");
}

TEST(ValidateProtocol, UnenrolledSpeakerNamesFirstIndex) {
    EnrollmentMap e;
    e.add("s1", "a");
    try {
        validate_protocol({{"s1", "u", TrialLabel::Target}, {"s9", "u", TrialLabel::Target}, {"s9", "v", TrialLabel::Spoof}},
                          e);
        FAIL();
    } catch (const Error& err) {
        EXPECT_EQ(err.code(), ErrorCode::UnenrolledSpeaker);
        EXPECT_NE(std::string(err.what()).find("s9"), std::string::npos);
        EXPECT_NE(std::string(err.what()).find("trial 1"), std::string::npos);
    }
}

TEST(ValidateProtocol, Empty) {
    auto set = validate_protocol({}, {});
    EXPECT_EQ(set.counts, LabelCounts{});
}

// Random protocols survive serialize -> parse.
TEST(ProtocolProperty, RoundTrip) {
    Rng rng(11);
    for (int iter = 0; iter < 100; ++iter) {
        EnrollmentMap e;
        std::vector<Trial> trials;
        const auto speakers = 1 + rng.below(6);
        for (std::uint64_t s = 0; s < speakers; ++s) {
            const auto n = 1 + rng.below(4);
            for (std::uint64_t u = 0; u < n; ++u) e.add("s" + std::to_string(s), "e" + std::to_string(s) + "_" + std::to_string(u));
        }
        const auto n_trials = rng.below(30);
        for (std::uint64_t t = 0; t < n_trials; ++t) {
            trials.push_back({"s" + std::to_string(rng.below(speakers)), "t" + std::to_string(rng.below(50)),
                              kAllLabels[rng.below(3)]});
        }
        auto set = validate_protocol(trials, e, "p");
        auto again = validate_protocol(parse_trials(serialize_trials(set.trials)),
                                       parse_enrollment(serialize_enrollment(set.enrollment)), "p");
        ASSERT_EQ(set, again);
    }
}

TEST(Labels, NamesRoundTrip) {
    for (auto label : kAllLabels) EXPECT_EQ(parse_label(label_name(label)), label);
    EXPECT_EQ(parse_label("TaRgEt"), TrialLabel::Target);
    EXPECT_FALSE(parse_label("bonafide").has_value());
}
