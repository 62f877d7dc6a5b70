#pragma once

// Central finite-difference check of the fusion-network gradients.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "sasv/fusionnet.hpp"
#include "sasv/rng.hpp"

namespace sasv::test {

struct GradCheck {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
};

// Relative error |a - n| / max(|a|, |n|, floor). The floor keeps gradients that
// are essentially zero from turning rounding noise into a large ratio.
inline double rel_error(double analytic, double numeric, double floor = 1e-3) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline GradCheck check_gradients(FusionParams params, std::span<const FusionItem> batch, double h = 1e-5) {
    const auto analytic = total_loss(params, batch);
    auto grads = analytic.gradients;
    auto g = tensors(grads);
    auto p = tensors(params);
    GradCheck out;
    for (std::size_t t = 0; t < p.size(); ++t) {
        for (std::size_t i = 0; i < p[t].size(); ++i) {
            const double saved = p[t][i];
            p[t][i] = saved + h;
            const double up = total_loss(params, batch).loss;
            p[t][i] = saved - h;
            const double down = total_loss(params, batch).loss;
            p[t][i] = saved;
            const double numeric = (up - down) / (2 * h);
            out.max_rel_error = std::max(out.max_rel_error, rel_error(g[t][i], numeric));
            ++out.checked;
        }
    }
    return out;
}

inline std::vector<FusionItem> random_items(const FusionDims& dims, std::size_t count, Rng& rng) {
    std::vector<FusionItem> items(count);
    for (std::size_t k = 0; k < count; ++k) {
        items[k].cm_concat.resize(dims.cm_dim);
        items[k].sv_scores.resize(dims.num_sv);
        for (auto& x : items[k].cm_concat) x = rng.normal();
        for (auto& x : items[k].sv_scores) x = rng.uniform(-1, 1);
        items[k].label = static_cast<int>(rng.below(2));
    }
    return items;
}

// Biases are zero after init; randomize them too so every tensor is exercised.
inline FusionParams random_params(const FusionDims& dims, Rng& rng) {
    auto params = init_params(dims, rng.next_u64());
    for (auto t : tensors(params)) {
        for (auto& x : t) x += rng.uniform(-0.3, 0.3);
    }
    return params;
}

} // namespace sasv::test
