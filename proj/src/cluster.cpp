#include "umc/cluster.hpp"

#include <limits>

namespace umc {

namespace {

// Nearest centroid per point (lower index wins ties); returns the inertia.
double assign(const Mat& points, const Mat& centroids, std::vector<int>& assignment, std::vector<double>& dist2) {
    const Eigen::Index n = points.rows();
    assignment.assign(static_cast<std::size_t>(n), 0);
    dist2.assign(static_cast<std::size_t>(n), 0.0);
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        int best_c = 0;
        for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
            double d = (points.row(i) - centroids.row(c)).squaredNorm();
            if (d < best) {
                best = d;
                best_c = static_cast<int>(c);
            }
        }
        assignment[static_cast<std::size_t>(i)] = best_c;
        dist2[static_cast<std::size_t>(i)] = best;
        inertia += best;
    }
    return inertia;
}

}  // namespace

Mat kmeanspp_init(const Mat& points, int k, Rng& rng) {
    const Eigen::Index n = points.rows();
    if (k < 1) throw Error(ErrorCode::BadK, "k must be positive");
    if (n < k) throw Error(ErrorCode::TooFewPoints, std::to_string(n) + " points for k=" + std::to_string(k));

    Mat centroids(k, points.cols());
    std::size_t first = rng.index(static_cast<std::size_t>(n));
    centroids.row(0) = points.row(static_cast<Eigen::Index>(first));
    std::vector<double> d2(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) d2[i] = (points.row(i) - centroids.row(0)).squaredNorm();

    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (double d : d2) total += d;
        Eigen::Index chosen = 0;
        if (total > 0.0) {
            double target = rng.uniform() * total;
            double acc = 0.0;
            chosen = -1;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += d2[i];
                if (d2[i] > 0.0 && target < acc) {
                    chosen = i;
                    break;
                }
            }
            if (chosen < 0) {
                // Round-off pushed target past the last bucket; take the last positive weight.
                for (Eigen::Index i = n - 1; i >= 0; --i) {
                    if (d2[i] > 0.0) {
                        chosen = i;
                        break;
                    }
                }
            }
        } else {
            chosen = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)));
        }
        centroids.row(c) = points.row(chosen);
        for (Eigen::Index i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], (points.row(i) - centroids.row(c)).squaredNorm());
        }
    }
    return centroids;
}

ClusterState lloyd(const Mat& points, const Mat& init_centroids, const LloydOptions& opts) {
    if (init_centroids.cols() != points.cols()) {
        throw Error(ErrorCode::DimMismatch, "centroid dimension differs from point dimension");
    }
    const int k = static_cast<int>(init_centroids.rows());
    if (k < 1) throw Error(ErrorCode::BadK, "need at least one centroid");
    if (points.rows() < k) throw Error(ErrorCode::TooFewPoints, "fewer points than centroids");

    ClusterState st;
    st.centroids = init_centroids;
    std::vector<double> dist2;
    for (int it = 0; it < opts.max_iters; ++it) {
        st.inertia_history.push_back(assign(points, st.centroids, st.assignments, dist2));
        ++st.iterations;

        Mat sums = Mat::Zero(k, points.cols());
        std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < points.rows(); ++i) {
            int c = st.assignments[static_cast<std::size_t>(i)];
            sums.row(c) += points.row(i);
            ++counts[static_cast<std::size_t>(c)];
        }
        Mat next = st.centroids;
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                next.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
                continue;
            }
            // Empty cluster: move it onto the point farthest from its centroid.
            std::size_t far = 0;
            for (std::size_t i = 1; i < dist2.size(); ++i) {
                if (dist2[i] > dist2[far]) far = i;
            }
            next.row(c) = points.row(static_cast<Eigen::Index>(far));
            dist2[far] = 0.0;
        }
        double shift = 0.0;
        for (int c = 0; c < k; ++c) shift = std::max(shift, (next.row(c) - st.centroids.row(c)).norm());
        st.centroids = std::move(next);
        if (shift < opts.tol) break;
    }
    // Final assignment against the final centroids keeps the nearest-centroid invariant.
    st.inertia = assign(points, st.centroids, st.assignments, dist2);
    st.inertia_history.push_back(st.inertia);

    st.members.assign(static_cast<std::size_t>(k), {});
    for (std::size_t i = 0; i < st.assignments.size(); ++i) {
        st.members[static_cast<std::size_t>(st.assignments[i])].push_back(i);
    }
    return st;
}

ClusterState cluster_round(const Mat& points, const ClusterState* prev, int k, Rng& rng, const LloydOptions& opts) {
    if (prev == nullptr) {
        ClusterState st = lloyd(points, kmeanspp_init(points, k, rng), opts);
        st.round = 0;
        return st;
    }
    if (prev->k() != k) throw Error(ErrorCode::BadK, "inherited centroids do not match k");
    ClusterState st = lloyd(points, prev->centroids, opts);
    st.round = prev->round + 1;
    return st;
}

}  // namespace umc
