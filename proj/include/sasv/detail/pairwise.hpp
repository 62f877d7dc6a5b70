#pragma once

// Fixed-order pairwise gradient reduction. A batch is split at n/2
// recursively down to single items, so the sum over B ++ B is exactly twice
// the sum over B.

#include <algorithm>
#include <cstddef>
#include <vector>

namespace sasv::detail {

template <typename Grad>
void zero_tensors(Grad& g) {
    for (auto t : tensors(g)) std::fill(t.begin(), t.end(), 0.0);
}

template <typename Grad>
void add_tensors(Grad& acc, Grad& other) {
    auto a = tensors(acc);
    auto b = tensors(other);
    for (std::size_t t = 0; t < a.size(); ++t) {
        for (std::size_t i = 0; i < a[t].size(); ++i) a[t][i] += b[t][i];
    }
}

template <typename Grad>
void divide_tensors(Grad& g, double divisor) {
    for (auto t : tensors(g)) {
        for (double& x : t) x /= divisor;
    }
}

template <typename Grad, typename ItemFn>
void pairwise_gradients_impl(std::size_t lo, std::size_t hi, Grad& out, std::vector<Grad>& scratch, std::size_t depth,
                             ItemFn& item_fn) {
    if (hi - lo == 1) {
        zero_tensors(out);
        item_fn(lo, out);
        return;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    pairwise_gradients_impl(lo, mid, out, scratch, depth + 1, item_fn);
    Grad& right = scratch[depth];
    pairwise_gradients_impl(mid, hi, right, scratch, depth + 1, item_fn);
    add_tensors(out, right);
}

/// out (already shaped) receives sum_i grad_i, where item_fn(i, g)
/// accumulates item i's gradient into a zeroed g.
template <typename Grad, typename ItemFn>
void pairwise_gradients(std::size_t n, Grad& out, ItemFn&& item_fn) {
    std::size_t depth = 0;
    while ((std::size_t{1} << depth) < n) ++depth;
    std::vector<Grad> scratch(depth + 1, out);
    pairwise_gradients_impl(0, n, out, scratch, 0, item_fn);
}

} // namespace sasv::detail
