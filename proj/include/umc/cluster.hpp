#pragma once

#include "umc/numerics.hpp"

#include <vector>

namespace umc {

struct ClusterState {
    Mat centroids;                                // k x d
    std::vector<int> assignments;                 // cluster id per sample
    std::vector<std::vector<std::size_t>> members;
    double inertia = 0.0;                         // sum of squared distances to assigned centroids
    int round = 0;
    int iterations = 0;                           // Lloyd iterations used
    std::vector<double> inertia_history;          // inertia after every assignment step

    int k() const { return static_cast<int>(centroids.rows()); }
};

struct LloydOptions {
    int max_iters = 300;
    double tol = 1e-6;  // stop when the largest centroid displacement falls below this
};

/// K-Means++ seeding: first centroid uniform, then D^2 sampling.
Mat kmeanspp_init(const Mat& points, int k, Rng& rng);

/// Lloyd iterations from the given centroids. Empty clusters are reseeded with the point
/// farthest from its current centroid; ties in assignment go to the lower cluster index.
ClusterState lloyd(const Mat& points, const Mat& init_centroids, const LloydOptions& opts = {});

/// One curriculum clustering round: fresh K-Means++ when there is no previous state,
/// otherwise Lloyd seeded with the previous round's centroids.
ClusterState cluster_round(const Mat& points, const ClusterState* prev, int k, Rng& rng,
                           const LloydOptions& opts = {});

}  // namespace umc
