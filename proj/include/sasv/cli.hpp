#pragma once

// Command-line workflows: gen-synth, train, evaluate, baseline1, baseline2-train.

#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sasv/protocol.hpp"

namespace sasv::cli {

/// args excludes the program name. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Score files hold one "<speaker_id> <test_utt_id> <score>" line per trial.
std::string serialize_scores(const std::vector<Trial>& trials, std::span<const double> scores);
/// Looks up each trial's score by (speaker_id, test_utt_id). Throws
/// MissingUtterance for trials without a line.
std::vector<double> parse_scores(std::string_view text, const std::vector<Trial>& trials);

} // namespace sasv::cli
