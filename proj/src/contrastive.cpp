#include "umc/contrastive.hpp"

#include <cmath>
#include <map>

namespace umc {

template <class T>
ViewBatch<T> make_view_batch(MatT<T> normalized, int views_per_origin, const std::vector<int>* labels) {
    if (views_per_origin < 2 || normalized.rows() % views_per_origin != 0) {
        throw Error(ErrorCode::DimMismatch, "view rows must be a multiple of views_per_origin (>= 2)");
    }
    const int B = static_cast<int>(normalized.rows() / views_per_origin);
    if (labels && static_cast<int>(labels->size()) != B) {
        throw Error(ErrorCode::DimMismatch, "one pseudo-label per origin is required");
    }
    static constexpr ViewTag kMultimodal[3] = {ViewTag::TAV, ViewTag::TA0, ViewTag::T0V};
    static constexpr ViewTag kDropout[2] = {ViewTag::Dropout1, ViewTag::Dropout2};
    ViewBatch<T> vb;
    vb.embeddings = std::move(normalized);
    std::vector<int> row_labels;
    for (int v = 0; v < views_per_origin; ++v) {
        for (int b = 0; b < B; ++b) {
            vb.origin.push_back(b);
            vb.view.push_back(views_per_origin == 3 ? kMultimodal[v] : (views_per_origin == 2 ? kDropout[v] : ViewTag::TAV));
            if (labels) row_labels.push_back((*labels)[static_cast<std::size_t>(b)]);
        }
    }
    if (labels) vb.pseudo_label = std::move(row_labels);
    return vb;
}

namespace {

// Row-wise log-sum-exp of s_ik over k != i, with max subtraction, plus the softmax it induces.
template <class T>
void masked_softmax(const MatT<T>& scaled, VecT<T>& lse, MatT<T>& prob) {
    const Eigen::Index R = scaled.rows();
    lse.resize(R);
    prob.setZero(R, R);
    for (Eigen::Index i = 0; i < R; ++i) {
        T mx = -std::numeric_limits<T>::infinity();
        for (Eigen::Index k = 0; k < R; ++k) {
            if (k != i) mx = std::max(mx, scaled(i, k));
        }
        T sum = 0;
        for (Eigen::Index k = 0; k < R; ++k) {
            if (k != i) sum += std::exp(scaled(i, k) - mx);
        }
        lse(i) = mx + std::log(sum);
        for (Eigen::Index k = 0; k < R; ++k) {
            if (k != i) prob(i, k) = std::exp(scaled(i, k) - lse(i));
        }
    }
}

template <class T>
void check_batch(const ViewBatch<T>& batch, double tau) {
    if (!(tau > 0)) throw Error(ErrorCode::BadConfig, "temperature must be positive");
    if (static_cast<std::size_t>(batch.rows()) != batch.origin.size()) {
        throw Error(ErrorCode::DimMismatch, "origin list does not match embedding rows");
    }
}

// d loss / d E given d loss / d S where S = E E^T / tau.
template <class T>
MatT<T> similarity_backward(const MatT<T>& g_scaled, const MatT<T>& e, double tau) {
    return ((g_scaled + g_scaled.transpose()) * e) / static_cast<T>(tau);
}

}  // namespace

template <class T>
LossResult<T> ucl_loss(const ViewBatch<T>& batch, double tau) {
    check_batch(batch, tau);
    std::map<int, int> per_origin;
    for (int o : batch.origin) ++per_origin[o];
    if (per_origin.size() < 2) throw Error(ErrorCode::BatchTooSmall, "contrastive batch needs at least 2 samples");

    const Eigen::Index R = batch.rows();
    const MatT<T>& e = batch.embeddings;
    MatT<T> scaled = (e * e.transpose()) / static_cast<T>(tau);
    VecT<T> lse;
    MatT<T> prob;
    masked_softmax(scaled, lse, prob);

    std::size_t pairs = 0;
    for (Eigen::Index i = 0; i < R; ++i) pairs += static_cast<std::size_t>(per_origin[batch.origin[i]] - 1);
    if (pairs == 0) throw Error(ErrorCode::NoPositives, "no positive pairs in batch");

    LossResult<T> out;
    out.terms.reserve(pairs);
    MatT<T> g = MatT<T>::Zero(R, R);
    T total = 0;
    const T inv_pairs = T(1) / static_cast<T>(pairs);
    for (Eigen::Index i = 0; i < R; ++i) {
        const T positives = static_cast<T>(per_origin[batch.origin[i]] - 1);
        g.row(i) = prob.row(i) * positives * inv_pairs;
        for (Eigen::Index j = 0; j < R; ++j) {
            if (j == i || batch.origin[j] != batch.origin[i]) continue;
            T term = lse(i) - scaled(i, j);
            out.terms.push_back(term);
            total += term;
            g(i, j) -= inv_pairs;
        }
    }
    out.value = total * inv_pairs;
    out.grad = similarity_backward(g, e, tau);
    return out;
}

template <class T>
LossResult<T> mscl_loss(const ViewBatch<T>& batch, double tau) {
    check_batch(batch, tau);
    if (!batch.pseudo_label || batch.pseudo_label->size() != batch.origin.size()) {
        throw Error(ErrorCode::DimMismatch, "supervised contrastive loss needs a pseudo-label per row");
    }
    const auto& labels = *batch.pseudo_label;
    const Eigen::Index R = batch.rows();
    const MatT<T>& e = batch.embeddings;

    std::vector<int> positives(static_cast<std::size_t>(R), 0);
    std::size_t anchors = 0;
    for (Eigen::Index i = 0; i < R; ++i) {
        for (Eigen::Index j = 0; j < R; ++j) {
            if (j != i && labels[j] == labels[i]) ++positives[i];
        }
        if (positives[i] > 0) ++anchors;
    }
    if (anchors == 0) throw Error(ErrorCode::NoPositives, "every anchor has an empty positive set");

    MatT<T> scaled = (e * e.transpose()) / static_cast<T>(tau);
    VecT<T> lse;
    MatT<T> prob;
    masked_softmax(scaled, lse, prob);

    LossResult<T> out;
    MatT<T> g = MatT<T>::Zero(R, R);
    T total = 0;
    const T inv_anchors = T(1) / static_cast<T>(anchors);
    for (Eigen::Index i = 0; i < R; ++i) {
        if (positives[i] == 0) continue;
        const T inv_pos = T(1) / static_cast<T>(positives[i]);
        T pos_sum = 0;
        g.row(i) = prob.row(i) * inv_anchors;
        for (Eigen::Index j = 0; j < R; ++j) {
            if (j == i || labels[j] != labels[i]) continue;
            pos_sum += scaled(i, j);
            g(i, j) -= inv_pos * inv_anchors;
        }
        T term = lse(i) - pos_sum * inv_pos;
        out.terms.push_back(term);
        total += term;
    }
    out.value = total * inv_anchors;
    out.grad = similarity_backward(g, e, tau);
    return out;
}

template <class T>
LossResult<T> centroid_mse_loss(const MatT<T>& z, const MatT<T>& targets) {
    if (z.rows() != targets.rows() || z.cols() != targets.cols() || z.rows() == 0) {
        throw Error(ErrorCode::DimMismatch, "MSE inputs must have equal non-empty shapes");
    }
    MatT<T> diff = z - targets;
    const T inv_n = T(1) / static_cast<T>(z.rows());
    LossResult<T> out;
    out.value = diff.squaredNorm() * inv_n;
    out.grad = diff * (T(2) * inv_n);
    return out;
}

std::pair<std::vector<double>, std::vector<double>> dropout_twice_views(std::span<const double> z, double rate,
                                                                         Rng& rng) {
    if (!(rate > 0.0 && rate < 1.0)) throw Error(ErrorCode::BadRate, "dropout rate must be in (0,1)");
    const auto n = static_cast<Eigen::Index>(z.size());
    Mat masks = dropout_mask<double>(2, n, rate, rng);
    std::pair<std::vector<double>, std::vector<double>> views{std::vector<double>(z.size()),
                                                               std::vector<double>(z.size())};
    for (Eigen::Index i = 0; i < n; ++i) {
        views.first[i] = z[i] * masks(0, i);
        views.second[i] = z[i] * masks(1, i);
    }
    return views;
}

#define UMC_INSTANTIATE(T)                                                                   \
    template ViewBatch<T> make_view_batch<T>(MatT<T>, int, const std::vector<int>*);         \
    template LossResult<T> ucl_loss<T>(const ViewBatch<T>&, double);                         \
    template LossResult<T> mscl_loss<T>(const ViewBatch<T>&, double);                        \
    template LossResult<T> centroid_mse_loss<T>(const MatT<T>&, const MatT<T>&);

UMC_INSTANTIATE(float)
UMC_INSTANTIATE(double)

#undef UMC_INSTANTIATE

}  // namespace umc
