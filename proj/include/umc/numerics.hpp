#pragma once

#include "umc/error.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace umc {

/// Row-major dense matrix. Rows are samples (or sequence positions), columns are features.
template <class T>
using MatT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using VecT = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using Mat = MatT<double>;
using MatF = MatT<float>;
using Vec = VecT<double>;

template <class T>
bool all_finite(const MatT<T>& m) {
    return m.allFinite();
}

/// Returns v / ||v||. Throws NormZero for the zero vector.
std::vector<double> l2_normalize(std::span<const double> v);

double euclidean(std::span<const double> a, std::span<const double> b);

/// Row-wise variant used on point matrices.
template <class T>
T row_distance(const MatT<T>& m, Eigen::Index i, Eigen::Index j) {
    return (m.row(i) - m.row(j)).norm();
}

/// Seeded random stream. Streams with distinct labels derived from the same seed are
/// independent, so init / dropout / shuffle / kmeans draws never perturb each other.
class Rng {
public:
    Rng(std::uint64_t seed, std::string_view stream);

    std::uint64_t seed() const { return seed_; }

    double uniform();                        // [0, 1)
    double uniform(double lo, double hi);    // [lo, hi)
    double normal();                         // N(0, 1)
    std::size_t index(std::size_t n);        // uniform in [0, n)
    std::uint64_t next_u64() { return engine_(); }

    template <class It>
    void shuffle(It first, It last) {
        // Fisher-Yates with our own index draws so the sequence does not depend on
        // the standard library's shuffle implementation.
        auto n = static_cast<std::size_t>(last - first);
        for (std::size_t i = n; i > 1; --i) {
            std::size_t j = index(i);
            std::swap(first[i - 1], first[j]);
        }
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 1469598103934665603ULL);

}  // namespace umc
