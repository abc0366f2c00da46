#include "umc/metrics.hpp"

#include "umc/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace umc {

namespace {

void check_lengths(std::span<const int> gt, std::span<const int> pred) {
    if (gt.size() != pred.size()) {
        throw Error(ErrorCode::DimMismatch, "label vectors differ in length: " + std::to_string(gt.size()) + " vs " +
                                                std::to_string(pred.size()));
    }
}

std::vector<int> compact(std::span<const int> labels, std::size_t& distinct) {
    std::map<int, int> ids;
    for (int l : labels) ids.emplace(l, 0);
    int next = 0;
    for (auto& [label, id] : ids) id = next++;
    distinct = ids.size();
    std::vector<int> out;
    out.reserve(labels.size());
    for (int l : labels) out.push_back(ids[l]);
    return out;
}

double choose2(double x) { return x * (x - 1.0) / 2.0; }

double entropy(const std::vector<std::int64_t>& sums, double n) {
    double h = 0.0;
    for (auto s : sums) {
        if (s > 0) {
            double p = static_cast<double>(s) / n;
            h -= p * std::log(p);
        }
    }
    return h;
}

}  // namespace

Contingency contingency(std::span<const int> gt, std::span<const int> pred) {
    check_lengths(gt, pred);
    std::size_t n_gt = 0, n_pred = 0;
    auto g = compact(gt, n_gt);
    auto p = compact(pred, n_pred);
    Contingency c;
    c.counts.assign(n_pred, std::vector<std::int64_t>(n_gt, 0));
    c.row_sums.assign(n_pred, 0);
    c.col_sums.assign(n_gt, 0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        ++c.counts[static_cast<std::size_t>(p[i])][static_cast<std::size_t>(g[i])];
        ++c.row_sums[static_cast<std::size_t>(p[i])];
        ++c.col_sums[static_cast<std::size_t>(g[i])];
    }
    c.total = static_cast<std::int64_t>(g.size());
    return c;
}

PairCounts pair_counts(const Contingency& c) {
    double together_both = 0, together_pred = 0, together_gt = 0;
    for (const auto& row : c.counts) {
        for (auto v : row) together_both += choose2(static_cast<double>(v));
    }
    for (auto u : c.row_sums) together_pred += choose2(static_cast<double>(u));
    for (auto v : c.col_sums) together_gt += choose2(static_cast<double>(v));
    return {together_both, together_pred - together_both, together_gt - together_both};
}

double nmi(std::span<const int> gt, std::span<const int> pred) {
    Contingency c = contingency(gt, pred);
    if (c.total == 0) throw Error(ErrorCode::TooFewSamples, "empty labelings");
    const double n = static_cast<double>(c.total);
    double h_gt = entropy(c.col_sums, n);
    double h_pred = entropy(c.row_sums, n);
    if (h_gt == 0.0 && h_pred == 0.0) return 1.0;  // both constant: identical partitions
    if (h_gt == 0.0 || h_pred == 0.0) return 0.0;
    double mi = 0.0;
    for (std::size_t i = 0; i < c.counts.size(); ++i) {
        for (std::size_t j = 0; j < c.col_sums.size(); ++j) {
            auto nij = c.counts[i][j];
            if (nij == 0) continue;
            double v = static_cast<double>(nij);
            mi += (v / n) * std::log(v * n / (static_cast<double>(c.row_sums[i]) * static_cast<double>(c.col_sums[j])));
        }
    }
    mi = std::max(mi, 0.0);
    return std::clamp(mi / (0.5 * (h_gt + h_pred)), 0.0, 1.0);
}

double ari(std::span<const int> gt, std::span<const int> pred) {
    check_lengths(gt, pred);
    if (gt.size() < 2) throw Error(ErrorCode::TooFewSamples, "ARI needs at least 2 samples");
    Contingency c = contingency(gt, pred);
    // Integer form scaled by 2*C(n,2) so the only rounding is the final division.
    using Wide = __int128;
    auto c2 = [](std::int64_t x) { return static_cast<Wide>(x) * (x - 1) / 2; };
    Wide index = 0, sum_pred = 0, sum_gt = 0;
    for (const auto& row : c.counts)
        for (auto x : row) index += c2(x);
    for (auto x : c.row_sums) sum_pred += c2(x);
    for (auto x : c.col_sums) sum_gt += c2(x);
    const Wide pairs = c2(c.total);
    const Wide num = 2 * pairs * index - 2 * sum_pred * sum_gt;
    const Wide denom = pairs * (sum_pred + sum_gt) - 2 * sum_pred * sum_gt;
    if (denom == 0) return 1.0;  // both partitions trivial in the same way
    return static_cast<double>(static_cast<long double>(num) / static_cast<long double>(denom));
}

double fmi(std::span<const int> gt, std::span<const int> pred) {
    check_lengths(gt, pred);
    if (gt.size() < 2) throw Error(ErrorCode::TooFewSamples, "FMI needs at least 2 samples");
    PairCounts pc = pair_counts(contingency(gt, pred));
    if (pc.tp == 0.0) return 0.0;
    return pc.tp / std::sqrt((pc.tp + pc.fp) * (pc.tp + pc.fn));
}

std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
    // Shortest augmenting path formulation with row/column potentials, O(n^3).
    const std::size_t n = cost.size();
    for (const auto& row : cost) {
        if (row.size() != n) throw Error(ErrorCode::DimMismatch, "hungarian needs a square cost matrix");
    }
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);  // match[col] = row, 1-based
    for (std::size_t i = 1; i <= n; ++i) {
        match[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            std::size_t i0 = match[j0], j1 = 0;
            double delta = inf;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            std::size_t j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(n, 0);
    for (std::size_t j = 1; j <= n; ++j) row_to_col[match[j] - 1] = static_cast<int>(j - 1);
    return row_to_col;
}

AccResult acc(std::span<const int> gt, std::span<const int> pred, int k) {
    check_lengths(gt, pred);
    if (k < 1) throw Error(ErrorCode::BadK, "k must be positive");
    if (gt.empty()) throw Error(ErrorCode::TooFewSamples, "ACC needs samples");
    auto in_range = [k](int l) { return l >= 0 && l < k; };
    if (!std::all_of(gt.begin(), gt.end(), in_range) || !std::all_of(pred.begin(), pred.end(), in_range)) {
        throw Error(ErrorCode::BadK, "labels must lie in [0, " + std::to_string(k) + ")");
    }
    const auto K = static_cast<std::size_t>(k);
    std::vector<std::vector<double>> cost(K, std::vector<double>(K, 0.0));
    for (std::size_t i = 0; i < gt.size(); ++i) cost[static_cast<std::size_t>(pred[i])][static_cast<std::size_t>(gt[i])] -= 1.0;
    AccResult r;
    r.mapping = hungarian(cost);
    double matched = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (r.mapping[static_cast<std::size_t>(pred[i])] == gt[i]) matched += 1;
    }
    r.acc = matched / static_cast<double>(gt.size());
    return r;
}

std::vector<std::vector<std::int64_t>> confusion(std::span<const int> gt, std::span<const int> pred,
                                                 std::span<const int> mapping) {
    check_lengths(gt, pred);
    const std::size_t k = mapping.size();
    std::vector<std::vector<std::int64_t>> m(k, std::vector<std::int64_t>(k, 0));
    for (std::size_t i = 0; i < gt.size(); ++i) {
        auto p = static_cast<std::size_t>(pred[i]);
        auto g = static_cast<std::size_t>(gt[i]);
        if (p >= k || g >= k) throw Error(ErrorCode::BadK, "label outside the mapping range");
        ++m[static_cast<std::size_t>(mapping[p])][g];
    }
    return m;
}

MetricReport evaluate(std::span<const int> gt, std::span<const int> pred, int k) {
    MetricReport r;
    r.nmi = nmi(gt, pred);
    r.ari = ari(gt, pred);
    r.fmi = fmi(gt, pred);
    AccResult a = acc(gt, pred, k);
    r.acc = a.acc;
    r.mapping = std::move(a.mapping);
    r.confusion = confusion(gt, pred, r.mapping);
    return r;
}

}  // namespace umc
