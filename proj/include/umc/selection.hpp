#pragma once

#include "umc/cluster.hpp"

#include <span>
#include <vector>

namespace umc {

enum class SelectionMode { Auto, Fixed, Random };
enum class CohesionObjective { Max, Min };

struct SelectionConfig {
    double threshold = 0.1;        // t: fraction of each cluster kept as high quality
    double lower = 0.1;            // L: smallest K-near candidate as a fraction of cluster size
    double interval = 0.02;        // Δ': spacing between candidate fractions
    int candidates = 10;           // u
    SelectionMode mode = SelectionMode::Auto;
    int fixed_k_near = 10;         // used in Fixed mode
    CohesionObjective objective = CohesionObjective::Max;

    void validate() const;
};

/// Guard against zero neighbor-distance sums when computing density.
inline constexpr double kDensityEpsilon = 1e-12;

/// rho_i = k_near / (sum of distances to the k_near nearest other points). k_near is clamped
/// to [1, n-1]. Throws ClusterTooSmall when n < 2.
std::vector<double> density(const Mat& points, int k_near);

/// Stable ascending argsort; the densest points sit at the tail.
std::vector<std::size_t> rank_indices(std::span<const double> rho);

/// floor(n * (L + Δ'(q-1))) for q = 1..u, each clamped to [1, n-1].
std::vector<int> knear_candidates(std::size_t n, const SelectionConfig& cfg);

/// Sum over points of the mean Euclidean distance to the other points. Needs m >= 2.
double cohesion(const Mat& points);

/// max(1, floor(n * t)).
std::size_t selection_size(std::size_t n, double t);

struct ClusterSelection {
    int k_near = 0;                     // 0 in Random mode
    std::vector<std::size_t> selected;  // local indices, densest first
    std::vector<double> density;        // at the chosen k_near (empty in Random mode)
    std::vector<double> candidate_scores;
};

/// Picks K-near for one cluster and returns its top-m densest members.
/// `rng` is only drawn from in Random mode.
ClusterSelection select_cluster(const Mat& points, const SelectionConfig& cfg, Rng& rng);

struct SelectionResult {
    std::vector<int> k_near;                    // per cluster (0 when not applicable)
    std::vector<std::vector<double>> densities; // per cluster, aligned with ClusterState::members
    std::vector<std::size_t> selected;          // Idx', sorted global indices
    std::vector<std::size_t> complement;        // sorted global indices
};

SelectionResult select_all(const Mat& points, const ClusterState& state, const SelectionConfig& cfg, Rng& rng);

}  // namespace umc
