#include "umc/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace umc {

void SelectionConfig::validate() const {
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error(ErrorCode::BadConfig, "threshold must be in [0,1]");
    if (!(lower >= 0.0 && lower <= 1.0)) throw Error(ErrorCode::BadConfig, "select.lower must be in [0,1]");
    if (!(interval > 0.0)) throw Error(ErrorCode::BadConfig, "select.interval must be positive");
    if (candidates < 1) throw Error(ErrorCode::BadConfig, "select.candidates must be at least 1");
    if (lower + interval * (candidates - 1) > 1.0 + 1e-12) {
        throw Error(ErrorCode::BadConfig, "largest K-near candidate fraction exceeds 1");
    }
    if (mode == SelectionMode::Fixed && fixed_k_near < 1) {
        throw Error(ErrorCode::BadConfig, "select.k_near must be positive");
    }
}

namespace {

// floor() that tolerates products such as 100 * 0.28 landing a hair below an integer.
std::size_t safe_floor(double x) { return static_cast<std::size_t>(std::floor(x + 1e-9)); }

// Pairwise distances plus, per point, the sorted distances to every other point; density for
// any k_near is then a prefix sum.
struct NeighborTable {
    Mat dist;
    std::vector<std::vector<double>> prefix;  // prefix[i][k] = sum of k nearest distances

    explicit NeighborTable(const Mat& points) {
        const Eigen::Index n = points.rows();
        dist.resize(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            dist(i, i) = 0.0;
            for (Eigen::Index j = i + 1; j < n; ++j) dist(i, j) = dist(j, i) = row_distance(points, i, j);
        }
        prefix.resize(static_cast<std::size_t>(n));
        std::vector<double> row;
        for (Eigen::Index i = 0; i < n; ++i) {
            row.clear();
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j != i) row.push_back(dist(i, j));
            }
            std::sort(row.begin(), row.end());
            auto& p = prefix[static_cast<std::size_t>(i)];
            p.assign(row.size() + 1, 0.0);
            for (std::size_t k = 0; k < row.size(); ++k) p[k + 1] = p[k] + row[k];
        }
    }

    std::size_t size() const { return prefix.size(); }

    std::vector<double> density(int k_near) const {
        const int n = static_cast<int>(size());
        const int k = std::clamp(k_near, 1, n - 1);
        std::vector<double> rho(size());
        for (std::size_t i = 0; i < size(); ++i) {
            double sum = prefix[i][static_cast<std::size_t>(k)];
            rho[i] = sum > 0.0 ? k / sum : 1.0 / kDensityEpsilon;
        }
        return rho;
    }

    double cohesion(std::span<const std::size_t> subset) const {
        const std::size_t m = subset.size();
        if (m < 2) throw Error(ErrorCode::SubsetTooSmall, "cohesion needs at least 2 points");
        double total = 0.0;
        for (std::size_t a = 0; a < m; ++a) {
            double s = 0.0;
            for (std::size_t b = 0; b < m; ++b) {
                if (a != b) s += dist(static_cast<Eigen::Index>(subset[a]), static_cast<Eigen::Index>(subset[b]));
            }
            total += s / static_cast<double>(m - 1);
        }
        return total;
    }
};

std::vector<std::size_t> top_m(const std::vector<double>& rho, std::size_t m) {
    auto order = rank_indices(rho);
    return {order.rbegin(), order.rbegin() + static_cast<std::ptrdiff_t>(m)};
}

}  // namespace

std::vector<double> density(const Mat& points, int k_near) {
    if (points.rows() < 2) throw Error(ErrorCode::ClusterTooSmall, "density needs at least 2 points");
    return NeighborTable(points).density(k_near);
}

std::vector<std::size_t> rank_indices(std::span<const double> rho) {
    std::vector<std::size_t> idx(rho.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return rho[a] < rho[b]; });
    return idx;
}

std::vector<int> knear_candidates(std::size_t n, const SelectionConfig& cfg) {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(cfg.candidates));
    const int hi = std::max(1, static_cast<int>(n) - 1);
    for (int q = 1; q <= cfg.candidates; ++q) {
        double frac = cfg.lower + cfg.interval * (q - 1);
        int k = static_cast<int>(safe_floor(static_cast<double>(n) * frac));
        out.push_back(std::clamp(k, 1, hi));
    }
    return out;
}

double cohesion(const Mat& points) {
    if (points.rows() < 2) throw Error(ErrorCode::SubsetTooSmall, "cohesion needs at least 2 points");
    NeighborTable table(points);
    std::vector<std::size_t> all(table.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return table.cohesion(all);
}

std::size_t selection_size(std::size_t n, double t) {
    return std::max<std::size_t>(1, safe_floor(static_cast<double>(n) * t));
}

ClusterSelection select_cluster(const Mat& points, const SelectionConfig& cfg, Rng& rng) {
    const std::size_t n = static_cast<std::size_t>(points.rows());
    if (n < 2) throw Error(ErrorCode::ClusterTooSmall, "selection needs at least 2 points");
    const std::size_t m = std::min(n, selection_size(n, cfg.threshold));

    ClusterSelection out;
    if (cfg.mode == SelectionMode::Random) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        rng.shuffle(idx.begin(), idx.end());
        out.selected.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m));
        return out;
    }

    NeighborTable table(points);
    if (cfg.mode == SelectionMode::Fixed) {
        out.k_near = std::clamp(cfg.fixed_k_near, 1, static_cast<int>(n) - 1);
        out.density = table.density(out.k_near);
        out.selected = top_m(out.density, m);
        return out;
    }

    const auto cands = knear_candidates(n, cfg);
    if (m < 2) {
        // A single point has no cohesion; use the smallest candidate.
        out.k_near = cands.front();
        out.density = table.density(out.k_near);
        out.selected = top_m(out.density, m);
        return out;
    }
    std::size_t best = 0;
    for (std::size_t q = 0; q < cands.size(); ++q) {
        auto rho = table.density(cands[q]);
        auto subset = top_m(rho, m);
        double score = table.cohesion(subset);
        out.candidate_scores.push_back(score);
        bool better = cfg.objective == CohesionObjective::Max ? score > out.candidate_scores[best]
                                                              : score < out.candidate_scores[best];
        if (q == 0 || better) {
            best = q;
            out.k_near = cands[q];
            out.density = std::move(rho);
            out.selected = std::move(subset);
        }
    }
    return out;
}

SelectionResult select_all(const Mat& points, const ClusterState& state, const SelectionConfig& cfg, Rng& rng) {
    cfg.validate();
    SelectionResult res;
    const std::size_t k = state.members.size();
    res.k_near.assign(k, 0);
    res.densities.assign(k, {});
    std::vector<char> chosen(static_cast<std::size_t>(points.rows()), 0);
    for (std::size_t c = 0; c < k; ++c) {
        const auto& members = state.members[c];
        if (members.size() < 2) {
            for (auto i : members) chosen[i] = 1;
            continue;
        }
        Mat local(static_cast<Eigen::Index>(members.size()), points.cols());
        for (std::size_t i = 0; i < members.size(); ++i) local.row(static_cast<Eigen::Index>(i)) = points.row(static_cast<Eigen::Index>(members[i]));
        ClusterSelection sel = select_cluster(local, cfg, rng);
        res.k_near[c] = sel.k_near;
        res.densities[c] = std::move(sel.density);
        for (auto li : sel.selected) chosen[members[li]] = 1;
    }
    for (std::size_t i = 0; i < chosen.size(); ++i) (chosen[i] ? res.selected : res.complement).push_back(i);
    return res;
}

}  // namespace umc
