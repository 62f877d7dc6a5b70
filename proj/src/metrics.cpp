#include "sasv/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>

#include "json.hpp"
#include "sasv/error.hpp"

namespace sasv {

namespace {

struct SweepPoint {
    double threshold;
    double far;
    double frr;
};

void require_nonempty(std::span<const double> pos, std::span<const double> neg) {
    if (pos.empty()) throw Error(ErrorCode::EmptyClass, "no positive scores");
    if (neg.empty()) throw Error(ErrorCode::EmptyClass, "no negative scores");
}

// One point per distinct score, ascending.
std::vector<SweepPoint> sweep(std::span<const double> pos, std::span<const double> neg) {
    for (auto list : {pos, neg}) {
        for (double s : list) {
            if (!std::isfinite(s)) throw Error(ErrorCode::InvalidArgument, "non-finite score");
        }
    }
    std::vector<double> p(pos.begin(), pos.end());
    std::vector<double> n(neg.begin(), neg.end());
    std::sort(p.begin(), p.end());
    std::sort(n.begin(), n.end());
    const double np = static_cast<double>(p.size());
    const double nn = static_cast<double>(n.size());

    std::vector<SweepPoint> points;
    points.reserve(p.size() + n.size());
    std::size_t i = 0, j = 0; // counts of pos / neg strictly below the current threshold
    while (i < p.size() || j < n.size()) {
        double theta;
        if (j == n.size() || (i < p.size() && p[i] <= n[j])) {
            theta = p[i];
        } else {
            theta = n[j];
        }
        points.push_back({theta, static_cast<double>(n.size() - j) / nn, static_cast<double>(i) / np});
        while (i < p.size() && p[i] == theta) ++i;
        while (j < n.size() && n[j] == theta) ++j;
    }
    return points;
}

} // namespace

EerResult compute_eer(std::span<const double> pos, std::span<const double> neg) {
    require_nonempty(pos, neg);
    auto points = sweep(pos, neg);
    const double top = points.back().threshold;
    points.push_back({std::numeric_limits<double>::infinity(), 0.0, 1.0});

    for (std::size_t k = 0; k < points.size(); ++k) {
        const double diff = points[k].far - points[k].frr;
        if (diff > 0.0) continue;
        if (diff == 0.0) return {points[k].far, k + 1 == points.size() ? top : points[k].threshold};

        // k > 0 always: the lowest threshold accepts everything (FAR 1, FRR 0).
        const SweepPoint& a = points[k - 1];
        const SweepPoint& b = points[k];
        const double da = a.far - a.frr;
        const double t = da / (da - diff);
        const double far = a.far + t * (b.far - a.far);
        const double frr = a.frr + t * (b.frr - a.frr);
        const double threshold = std::isinf(b.threshold) ? a.threshold : a.threshold + t * (b.threshold - a.threshold);
        return {0.5 * (far + frr), threshold};
    }
    return {0.5, top}; // unreachable: the final point has FAR - FRR = -1
}

std::vector<ScoredTrial> attach_labels(const std::vector<Trial>& trials, std::span<const double> scores) {
    if (trials.size() != scores.size()) {
        throw Error(ErrorCode::ShapeMismatch, std::to_string(trials.size()) + " trials but " +
                                                  std::to_string(scores.size()) + " scores");
    }
    std::vector<ScoredTrial> out(trials.size());
    for (std::size_t i = 0; i < trials.size(); ++i) out[i] = {trials[i].label, scores[i]};
    return out;
}

MetricReport compute_report(std::span<const ScoredTrial> scored) {
    std::vector<double> target, nontarget, spoof;
    for (const auto& s : scored) {
        switch (s.label) {
        case TrialLabel::Target: target.push_back(s.score); break;
        case TrialLabel::NonTarget: nontarget.push_back(s.score); break;
        case TrialLabel::Spoof: spoof.push_back(s.score); break;
        }
    }
    for (auto [list, label] : {std::pair{&target, TrialLabel::Target}, std::pair{&nontarget, TrialLabel::NonTarget},
                               std::pair{&spoof, TrialLabel::Spoof}}) {
        if (list->empty()) {
            throw Error(ErrorCode::EmptyClass, "no " + std::string(label_name(label)) + " trials");
        }
    }
    std::vector<double> all_neg = nontarget;
    all_neg.insert(all_neg.end(), spoof.begin(), spoof.end());

    MetricReport report;
    report.sv = compute_eer(target, nontarget);
    report.spf = compute_eer(target, spoof);
    report.sasv = compute_eer(target, all_neg);
    report.counts = {target.size(), nontarget.size(), spoof.size()};
    return report;
}

std::vector<DetPoint> det_curve(std::span<const double> pos, std::span<const double> neg, std::size_t num_points) {
    require_nonempty(pos, neg);
    const auto points = sweep(pos, neg);

    std::vector<DetPoint> curve;
    curve.push_back({-std::numeric_limits<double>::infinity(), 1.0, 0.0});
    auto keep = [&](const SweepPoint& p) { curve.push_back({p.threshold, p.far, p.frr}); };
    if (num_points == 0 || num_points >= points.size()) {
        for (const auto& p : points) keep(p);
    } else if (num_points == 1) {
        keep(points.front());
    } else {
        const std::size_t last = points.size() - 1;
        for (std::size_t i = 0; i < num_points; ++i) {
            keep(points[(i * last + (num_points - 1) / 2) / (num_points - 1)]);
        }
    }
    curve.push_back({std::numeric_limits<double>::infinity(), 0.0, 1.0});
    return curve;
}

const std::vector<std::size_t>& Histogram::counts(TrialLabel label) const {
    switch (label) {
    case TrialLabel::Target: return target;
    case TrialLabel::NonTarget: return nontarget;
    case TrialLabel::Spoof: break;
    }
    return spoof;
}

Histogram histogram(std::span<const ScoredTrial> scored, std::size_t num_bins) {
    if (scored.empty()) throw Error(ErrorCode::EmptyInput, "histogram of zero trials");
    if (num_bins == 0) throw Error(ErrorCode::InvalidArgument, "histogram needs at least one bin");

    auto [lo_it, hi_it] = std::minmax_element(scored.begin(), scored.end(),
                                              [](const auto& a, const auto& b) { return a.score < b.score; });
    const double lo = lo_it->score;
    const double hi = hi_it->score;
    if (lo == hi) num_bins = 1;

    Histogram h;
    h.edges.resize(num_bins + 1);
    const double width = (hi - lo) / static_cast<double>(num_bins);
    for (std::size_t b = 0; b < num_bins; ++b) h.edges[b] = lo + width * static_cast<double>(b);
    h.edges[num_bins] = hi;
    h.target.assign(num_bins, 0);
    h.nontarget.assign(num_bins, 0);
    h.spoof.assign(num_bins, 0);

    for (const auto& s : scored) {
        std::size_t bin = 0;
        if (width > 0.0) {
            bin = static_cast<std::size_t>(std::floor((s.score - lo) / width));
            bin = std::min(bin, num_bins - 1);
        }
        switch (s.label) {
        case TrialLabel::Target: ++h.target[bin]; break;
        case TrialLabel::NonTarget: ++h.nontarget[bin]; break;
        case TrialLabel::Spoof: ++h.spoof[bin]; break;
        }
    }
    return h;
}

std::string format_percent(double rate) {
    const double rounded = std::nearbyint(rate * 100.0 * 100.0) / 100.0;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", rounded == 0.0 ? 0.0 : rounded);
    return buf;
}

std::string report_to_text(const MetricReport& report) {
    return "sv_eer=" + format_percent(report.sv.eer) + " spf_eer=" + format_percent(report.spf.eer) +
           " sasv_eer=" + format_percent(report.sasv.eer) + "\n";
}

std::string report_to_json(const MetricReport& report) {
    auto percent = [](double rate) { return std::stod(format_percent(rate)); };
    nlohmann::ordered_json j;
    j["sv_eer"] = percent(report.sv.eer);
    j["spf_eer"] = percent(report.spf.eer);
    j["sasv_eer"] = percent(report.sasv.eer);
    j["thresholds"] = {{"sv", report.sv.threshold}, {"spf", report.spf.threshold}, {"sasv", report.sasv.threshold}};
    j["counts"] = {{"target", report.counts.target},
                   {"nontarget", report.counts.nontarget},
                   {"spoof", report.counts.spoof}};
    return j.dump(2) + "\n";
}

namespace {

void append_number(std::string& out, double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, ptr);
}

} // namespace

std::string det_to_csv(const std::vector<DetPoint>& curve) {
    std::string out = "threshold,far,frr\n";
    for (const auto& p : curve) {
        append_number(out, p.threshold);
        out += ',';
        append_number(out, p.far);
        out += ',';
        append_number(out, p.frr);
        out += '\n';
    }
    return out;
}

std::string histogram_to_csv(const Histogram& hist) {
    std::string out = "label,bin_lo,bin_hi,count\n";
    for (TrialLabel label : kAllLabels) {
        const auto& counts = hist.counts(label);
        for (std::size_t b = 0; b < hist.num_bins(); ++b) {
            out += label_name(label);
            out += ',';
            append_number(out, hist.edges[b]);
            out += ',';
            append_number(out, hist.edges[b + 1]);
            out += ',';
            out += std::to_string(counts[b]);
            out += '\n';
        }
    }
    return out;
}

} // namespace sasv
