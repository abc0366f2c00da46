#pragma once

#include "umc/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace umc::test {

inline std::vector<int> random_labels(std::size_t n, int k, Rng& rng) {
    std::vector<int> v(n);
    for (auto& x : v) x = static_cast<int>(rng.index(static_cast<std::size_t>(k)));
    return v;
}

/// Best permutation match by exhaustive search.
inline double brute_acc(const std::vector<int>& gt, const std::vector<int>& pred, int k) {
    std::vector<int> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), 0);
    std::size_t best = 0;
    do {
        std::size_t hit = 0;
        for (std::size_t i = 0; i < gt.size(); ++i) hit += perm[static_cast<std::size_t>(pred[i])] == gt[i];
        best = std::max(best, hit);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return static_cast<double>(best) / static_cast<double>(gt.size());
}

/// FMI from O(n^2) pair enumeration.
inline double brute_fmi(const std::vector<int>& gt, const std::vector<int>& pred) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        for (std::size_t j = i + 1; j < gt.size(); ++j) {
            bool same_gt = gt[i] == gt[j], same_pred = pred[i] == pred[j];
            tp += same_gt && same_pred;
            fp += !same_gt && same_pred;
            fn += same_gt && !same_pred;
        }
    }
    return tp == 0 ? 0.0 : tp / std::sqrt((tp + fp) * (tp + fn));
}

}  // namespace umc::test
