#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace umc {

/// Counts of (predicted cluster, true class) co-occurrences over compacted label ids.
struct Contingency {
    std::vector<std::vector<std::int64_t>> counts;  // rows: predicted, cols: truth
    std::vector<std::int64_t> row_sums;
    std::vector<std::int64_t> col_sums;
    std::int64_t total = 0;
};

Contingency contingency(std::span<const int> gt, std::span<const int> pred);

/// Pair counts: TP = pairs together in both, FP = together in pred only, FN = together in truth only.
struct PairCounts {
    double tp = 0, fp = 0, fn = 0;
};
PairCounts pair_counts(const Contingency& c);

double nmi(std::span<const int> gt, std::span<const int> pred);
double ari(std::span<const int> gt, std::span<const int> pred);
double fmi(std::span<const int> gt, std::span<const int> pred);

struct AccResult {
    double acc = 0.0;
    std::vector<int> mapping;  // predicted cluster -> true class
};

/// Best one-to-one cluster->class matching via the Hungarian method. Labels must lie in [0, k).
AccResult acc(std::span<const int> gt, std::span<const int> pred, int k);

/// Minimum-cost perfect matching on a square cost matrix; returns the column for each row.
std::vector<int> hungarian(const std::vector<std::vector<double>>& cost);

/// k x k counts with row = mapping[pred], col = truth, so the diagonal holds correct assignments.
std::vector<std::vector<std::int64_t>> confusion(std::span<const int> gt, std::span<const int> pred,
                                                 std::span<const int> mapping);

struct MetricReport {
    double nmi = 0, ari = 0, acc = 0, fmi = 0;
    std::vector<int> mapping;
    std::vector<std::vector<std::int64_t>> confusion;

    /// Mean of the four scores, x100 as in results tables.
    double average() const { return 100.0 * (nmi + ari + acc + fmi) / 4.0; }
};

MetricReport evaluate(std::span<const int> gt, std::span<const int> pred, int k);

}  // namespace umc
