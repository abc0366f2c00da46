#pragma once

#include "umc/layers.hpp"

#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace umc {

enum class ViewTag { TAV, TA0, T0V, Dropout1, Dropout2 };

/// Projected, L2-normalized view vectors with their origin sample and (optionally) a
/// pseudo-label. Views of one origin always share its label.
template <class T>
struct ViewBatch {
    MatT<T> embeddings;
    std::vector<int> origin;
    std::vector<ViewTag> view;
    std::optional<std::vector<int>> pseudo_label;

    Eigen::Index rows() const { return embeddings.rows(); }
};

/// Builds a view-major batch: rows [v*B, (v+1)*B) hold view v of origins 0..B-1.
/// `labels`, when given, holds one pseudo-label per origin.
template <class T>
ViewBatch<T> make_view_batch(MatT<T> normalized, int views_per_origin,
                             const std::vector<int>* labels = nullptr);

template <class T>
struct LossResult {
    T value{};
    MatT<T> grad;         // d value / d embeddings
    std::vector<T> terms; // per positive pair (UCL) or per contributing anchor (MSCL)
};

/// Mean over every ordered positive pair (i, j) sharing an origin of
/// -log(exp(s_ij / tau) / sum_{k != i} exp(s_ik / tau)).
template <class T>
LossResult<T> ucl_loss(const ViewBatch<T>& batch, double tau);

/// Supervised variant: positives are all other rows with the anchor's pseudo-label.
/// Anchors without positives are skipped.
template <class T>
LossResult<T> mscl_loss(const ViewBatch<T>& batch, double tau);

/// Mean over rows of ||z_i - target_i||^2.
template <class T>
LossResult<T> centroid_mse_loss(const MatT<T>& z, const MatT<T>& targets);

/// Two independent inverted-dropout views of the same vector.
std::pair<std::vector<double>, std::vector<double>> dropout_twice_views(std::span<const double> z, double rate,
                                                                         Rng& rng);

/// Exposes a scalar loss as a DiffOp (1x1 output) so losses go through grad_check.
template <class T>
class LossOp final : public DiffOp<T> {
public:
    using Fn = std::function<LossResult<T>(const MatT<T>&)>;
    explicit LossOp(Fn fn) : fn_(std::move(fn)) {}

    MatT<T> forward(const MatT<T>& x) override {
        last_ = fn_(x);
        MatT<T> out(1, 1);
        out(0, 0) = last_.value;
        return out;
    }
    MatT<T> backward(const MatT<T>& grad_out) override { return last_.grad * grad_out(0, 0); }

private:
    Fn fn_;
    LossResult<T> last_;
};

}  // namespace umc
