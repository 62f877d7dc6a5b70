#pragma once

// Equal error rates under the three SASV trial typings:
//
//             target  nontarget  spoof
//   SASV-EER    +        -         -
//   SV-EER      +        -
//   SPF-EER     +                  -
//
// Conventions: a trial is accepted when score >= threshold, so
// FAR(t) = #{neg >= t} / |neg| and FRR(t) = #{pos < t} / |pos|.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sasv/protocol.hpp"

namespace sasv {

struct ScoredTrial {
    TrialLabel label = TrialLabel::Target;
    double score = 0.0;
};

struct EerResult {
    double eer = 0.0;
    double threshold = 0.0;
};

/// Sweeps every score as a candidate threshold (plus one point above the
/// maximum where FAR = 0 and FRR = 1). The EER is read where FAR - FRR
/// changes sign, linearly interpolated between the two bracketing sweep
/// points; an exact zero is returned as is. When the bracketing point is the
/// one above the maximum, the threshold is reported as the maximum score.
EerResult compute_eer(std::span<const double> pos, std::span<const double> neg);

struct MetricReport {
    EerResult sv;
    EerResult spf;
    EerResult sasv;
    LabelCounts counts;
};

/// Needs at least one trial of every label (EmptyClass otherwise).
MetricReport compute_report(std::span<const ScoredTrial> scored);

std::vector<ScoredTrial> attach_labels(const std::vector<Trial>& trials, std::span<const double> scores);

struct DetPoint {
    double threshold = 0.0;
    double far = 0.0;
    double frr = 0.0;
};

/// Ordered by increasing threshold, from (-inf, FAR 1, FRR 0) to
/// (+inf, FAR 0, FRR 1). num_points = 0 keeps every distinct threshold;
/// otherwise the interior is thinned to at most num_points evenly spaced
/// entries.
std::vector<DetPoint> det_curve(std::span<const double> pos, std::span<const double> neg,
                                std::size_t num_points = 0);

struct Histogram {
    /// num_bins + 1 shared edges; the last bin is closed on both ends.
    std::vector<double> edges;
    std::vector<std::size_t> target;
    std::vector<std::size_t> nontarget;
    std::vector<std::size_t> spoof;

    const std::vector<std::size_t>& counts(TrialLabel label) const;
    std::size_t num_bins() const { return edges.empty() ? 0 : edges.size() - 1; }
};

/// When every score is equal a single bin [s, s] is produced.
Histogram histogram(std::span<const ScoredTrial> scored, std::size_t num_bins);

/// rate * 100 rounded half-to-even at two decimals, e.g. "12.35".
std::string format_percent(double rate);

/// "sv_eer=1.23 spf_eer=0.00 sasv_eer=0.87\n"
std::string report_to_text(const MetricReport& report);
/// JSON object with keys sv_eer, spf_eer, sasv_eer (percent), thresholds, counts.
std::string report_to_json(const MetricReport& report);
/// "threshold,far,frr" header plus one row per point.
std::string det_to_csv(const std::vector<DetPoint>& curve);
/// "label,bin_lo,bin_hi,count" header plus one row per (label, bin).
std::string histogram_to_csv(const Histogram& hist);

} // namespace sasv
