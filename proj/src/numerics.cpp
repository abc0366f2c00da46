#include "umc/numerics.hpp"

#include <cmath>
#include <numbers>

namespace umc {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::NormZero: return "NormZero";
        case ErrorCode::DimMismatch: return "DimMismatch";
        case ErrorCode::GradNonFinite: return "GradNonFinite";
        case ErrorCode::BadContainer: return "BadContainer";
        case ErrorCode::CountMismatch: return "CountMismatch";
        case ErrorCode::CorruptData: return "CorruptData";
        case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
        case ErrorCode::SpecTooSmall: return "SpecTooSmall";
        case ErrorCode::EmptySequence: return "EmptySequence";
        case ErrorCode::BatchTooSmall: return "BatchTooSmall";
        case ErrorCode::NoPositives: return "NoPositives";
        case ErrorCode::BadRate: return "BadRate";
        case ErrorCode::TooFewPoints: return "TooFewPoints";
        case ErrorCode::ClusterTooSmall: return "ClusterTooSmall";
        case ErrorCode::SubsetTooSmall: return "SubsetTooSmall";
        case ErrorCode::TooFewSamples: return "TooFewSamples";
        case ErrorCode::BadK: return "BadK";
        case ErrorCode::BadGrid: return "BadGrid";
        case ErrorCode::BadConfig: return "BadConfig";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

std::vector<double> l2_normalize(std::span<const double> v) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    double norm = std::sqrt(sq);
    if (!(norm > 0.0)) throw Error(ErrorCode::NormZero, "cannot normalize a zero vector");
    std::vector<double> out(v.begin(), v.end());
    for (double& x : out) x /= norm;
    return out;
}

double euclidean(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::DimMismatch, "euclidean: " + std::to_string(a.size()) + " vs " +
                                                std::to_string(b.size()));
    }
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        sq += d * d;
    }
    return std::sqrt(sq);
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::string_view stream)
    : seed_(seed), engine_(splitmix64(seed ^ splitmix64(fnv1a64(stream)))) {}

double Rng::uniform() {
    // 53 random mantissa bits.
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

std::size_t Rng::index(std::size_t n) {
    // Reject the biased tail of the 64-bit range.
    std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % n);
}

}  // namespace umc
