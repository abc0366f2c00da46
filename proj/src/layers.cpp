#include "umc/layers.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace umc {

namespace {

void require_cols(Eigen::Index got, Eigen::Index want, const char* where) {
    if (got != want) {
        throw Error(ErrorCode::DimMismatch, std::string(where) + ": expected " + std::to_string(want) +
                                                " columns, got " + std::to_string(got));
    }
}

template <class T>
MatT<T> uniform_init(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
    MatT<T> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
    return m;
}

}  // namespace

// ---- Linear ---------------------------------------------------------------

template <class T>
Linear<T>::Linear(Eigen::Index in, Eigen::Index out, std::string name, Rng& init) {
    double bound = 1.0 / std::sqrt(static_cast<double>(in));
    weight_ = {name + ".weight", uniform_init<T>(out, in, bound, init), MatT<T>::Zero(out, in)};
    bias_ = {name + ".bias", uniform_init<T>(1, out, bound, init), MatT<T>::Zero(1, out)};
}

template <class T>
MatT<T> Linear<T>::forward(const MatT<T>& x) {
    require_cols(x.cols(), in_dim(), weight_.name.c_str());
    input_ = x;
    MatT<T> y = x * weight_.value.transpose();
    y.rowwise() += bias_.value.row(0);
    return y;
}

template <class T>
MatT<T> Linear<T>::backward(const MatT<T>& grad_out) {
    weight_.grad.noalias() += grad_out.transpose() * input_;
    bias_.grad.row(0) += grad_out.colwise().sum();
    return grad_out * weight_.value;
}

// ---- activations ----------------------------------------------------------

template <class T>
MatT<T> Gelu<T>::forward(const MatT<T>& x) {
    input_ = x;
    return x.unaryExpr([](T v) { return T(0.5) * v * (T(1) + std::erf(v / std::numbers::sqrt2_v<T>)); });
}

template <class T>
MatT<T> Gelu<T>::backward(const MatT<T>& grad_out) {
    const T inv_sqrt_2pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
    MatT<T> d = input_.unaryExpr([inv_sqrt_2pi](T v) {
        T cdf = T(0.5) * (T(1) + std::erf(v / std::numbers::sqrt2_v<T>));
        return cdf + v * inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
    });
    return grad_out.cwiseProduct(d);
}

template <class T>
MatT<T> Relu<T>::forward(const MatT<T>& x) {
    input_ = x;
    return x.cwiseMax(T(0));
}

template <class T>
MatT<T> Relu<T>::backward(const MatT<T>& grad_out) {
    return (input_.array() > T(0)).select(grad_out, T(0));
}

// ---- dropout --------------------------------------------------------------

template <class T>
MatT<T> dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
    MatT<T> mask(rows, cols);
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
        mask.data()[i] = rng.uniform() < rate ? T(0) : keep_scale;
    }
    return mask;
}

template <class T>
Dropout<T>::Dropout(double rate, Rng rng) : rate_(rate), rng_(std::move(rng)) {
    if (!(rate >= 0.0 && rate < 1.0)) throw Error(ErrorCode::BadRate, "dropout rate must be in [0,1)");
}

template <class T>
MatT<T> Dropout<T>::forward(const MatT<T>& x) {
    if (mode_ == Mode::Eval || rate_ == 0.0) {
        mask_ = MatT<T>::Ones(x.rows(), x.cols());
        return x;
    }
    if (!frozen_ || mask_.rows() != x.rows() || mask_.cols() != x.cols()) {
        mask_ = dropout_mask<T>(x.rows(), x.cols(), rate_, rng_);
    }
    return x.cwiseProduct(mask_);
}

template <class T>
MatT<T> Dropout<T>::backward(const MatT<T>& grad_out) {
    return grad_out.cwiseProduct(mask_);
}

// ---- layer norm -----------------------------------------------------------

template <class T>
LayerNorm<T>::LayerNorm(Eigen::Index dim, std::string name, double eps) : eps_(eps) {
    gamma_ = {name + ".gamma", MatT<T>::Ones(1, dim), MatT<T>::Zero(1, dim)};
    beta_ = {name + ".beta", MatT<T>::Zero(1, dim), MatT<T>::Zero(1, dim)};
}

template <class T>
MatT<T> LayerNorm<T>::forward(const MatT<T>& x) {
    require_cols(x.cols(), gamma_.value.cols(), gamma_.name.c_str());
    const Eigen::Index n = x.rows();
    const T d = static_cast<T>(x.cols());
    xhat_.resize(n, x.cols());
    inv_std_.resize(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        T mean = x.row(r).sum() / d;
        auto centered = x.row(r).array() - mean;
        T var = centered.square().sum() / d;
        inv_std_(r) = T(1) / std::sqrt(var + static_cast<T>(eps_));
        xhat_.row(r) = centered * inv_std_(r);
    }
    MatT<T> y = xhat_.array().rowwise() * gamma_.value.row(0).array();
    y.rowwise() += beta_.value.row(0);
    return y;
}

template <class T>
MatT<T> LayerNorm<T>::backward(const MatT<T>& grad_out) {
    gamma_.grad.row(0) += grad_out.cwiseProduct(xhat_).colwise().sum();
    beta_.grad.row(0) += grad_out.colwise().sum();
    MatT<T> gxhat = grad_out.array().rowwise() * gamma_.value.row(0).array();
    const T d = static_cast<T>(grad_out.cols());
    MatT<T> gx(grad_out.rows(), grad_out.cols());
    for (Eigen::Index r = 0; r < gx.rows(); ++r) {
        T sum_g = gxhat.row(r).sum();
        T sum_gx = gxhat.row(r).dot(xhat_.row(r));
        gx.row(r) = (inv_std_(r) / d) *
                    (d * gxhat.row(r).array() - sum_g - xhat_.row(r).array() * sum_gx);
    }
    return gx;
}

// ---- row normalization ----------------------------------------------------

template <class T>
MatT<T> RowNormalize<T>::forward(const MatT<T>& x) {
    norms_ = x.rowwise().norm();
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        if (!(norms_(r) > T(0))) throw Error(ErrorCode::NormZero, "row " + std::to_string(r) + " has zero norm");
    }
    output_ = x.array().colwise() / norms_.array();
    return output_;
}

template <class T>
MatT<T> RowNormalize<T>::backward(const MatT<T>& grad_out) {
    MatT<T> gx(grad_out.rows(), grad_out.cols());
    for (Eigen::Index r = 0; r < gx.rows(); ++r) {
        T proj = output_.row(r).dot(grad_out.row(r));
        gx.row(r) = (grad_out.row(r) - proj * output_.row(r)) / norms_(r);
    }
    return gx;
}

// ---- self attention -------------------------------------------------------

template <class T>
SelfAttention<T>::SelfAttention(Eigen::Index dim, int heads, const std::string& name, Rng& init)
    : heads_(heads),
      head_dim_(dim / heads),
      q_(dim, dim, name + ".q", init),
      k_(dim, dim, name + ".k", init),
      v_(dim, dim, name + ".v", init),
      out_(dim, dim, name + ".out", init) {
    if (heads <= 0 || dim % heads != 0) {
        throw Error(ErrorCode::DimMismatch, name + ": heads must divide the model dimension");
    }
}

template <class T>
std::vector<Param<T>*> SelfAttention<T>::params() {
    std::vector<Param<T>*> ps;
    for (auto* lin : {&q_, &k_, &v_, &out_}) {
        for (auto* p : lin->params()) ps.push_back(p);
    }
    return ps;
}

template <class T>
MatT<T> SelfAttention<T>::forward(const MatT<T>& x) {
    const Eigen::Index L = layout_.seq_len;
    const Eigen::Index B = layout_.batch();
    if (x.rows() != B * L) {
        throw Error(ErrorCode::DimMismatch, "attention input rows do not match the sequence layout");
    }
    queries_ = q_.forward(x);
    keys_ = k_.forward(x);
    values_ = v_.forward(x);
    const T scale = T(1) / std::sqrt(static_cast<T>(head_dim_));

    MatT<T> context = MatT<T>::Zero(x.rows(), x.cols());
    probs_.assign(static_cast<std::size_t>(B * heads_), MatT<T>());
    for (Eigen::Index b = 0; b < B; ++b) {
        const Eigen::Index len = layout_.lengths[static_cast<std::size_t>(b)];
        if (len <= 0 || len > L) throw Error(ErrorCode::EmptySequence, "sequence has no valid positions");
        for (int h = 0; h < heads_; ++h) {
            auto qb = queries_.block(b * L, h * head_dim_, L, head_dim_);
            auto kb = keys_.block(b * L, h * head_dim_, len, head_dim_);
            auto vb = values_.block(b * L, h * head_dim_, len, head_dim_);
            MatT<T> scores = (qb * kb.transpose()) * scale;  // L x len
            MatT<T> p = MatT<T>::Zero(L, L);
            for (Eigen::Index i = 0; i < L; ++i) {
                T mx = scores.row(i).maxCoeff();
                auto e = (scores.row(i).array() - mx).exp();
                p.row(i).head(len) = e / e.sum();
            }
            context.block(b * L, h * head_dim_, L, head_dim_) = p.leftCols(len) * vb;
            probs_[static_cast<std::size_t>(b * heads_ + h)] = std::move(p);
        }
    }
    return out_.forward(context);
}

template <class T>
MatT<T> SelfAttention<T>::backward(const MatT<T>& grad_out) {
    const Eigen::Index L = layout_.seq_len;
    const Eigen::Index B = layout_.batch();
    const T scale = T(1) / std::sqrt(static_cast<T>(head_dim_));
    MatT<T> g_context = out_.backward(grad_out);

    MatT<T> gq = MatT<T>::Zero(g_context.rows(), g_context.cols());
    MatT<T> gk = MatT<T>::Zero(g_context.rows(), g_context.cols());
    MatT<T> gv = MatT<T>::Zero(g_context.rows(), g_context.cols());
    for (Eigen::Index b = 0; b < B; ++b) {
        const Eigen::Index len = layout_.lengths[static_cast<std::size_t>(b)];
        for (int h = 0; h < heads_; ++h) {
            const MatT<T>& p_full = probs_[static_cast<std::size_t>(b * heads_ + h)];
            MatT<T> p = p_full.leftCols(len);
            auto qb = queries_.block(b * L, h * head_dim_, L, head_dim_);
            auto kb = keys_.block(b * L, h * head_dim_, len, head_dim_);
            auto vb = values_.block(b * L, h * head_dim_, len, head_dim_);
            auto gctx = g_context.block(b * L, h * head_dim_, L, head_dim_);

            MatT<T> gp = gctx * vb.transpose();  // L x len
            gv.block(b * L, h * head_dim_, len, head_dim_) += p.transpose() * gctx;
            VecT<T> row_dot = gp.cwiseProduct(p).rowwise().sum();
            MatT<T> gs = p.cwiseProduct(gp.colwise() - row_dot) * scale;
            gq.block(b * L, h * head_dim_, L, head_dim_) += gs * kb;
            gk.block(b * L, h * head_dim_, len, head_dim_) += gs.transpose() * qb;
        }
    }
    MatT<T> gx = q_.backward(gq);
    gx += k_.backward(gk);
    gx += v_.backward(gv);
    return gx;
}

// ---- sequential -----------------------------------------------------------

template <class T>
MatT<T> Sequential<T>::forward(const MatT<T>& x) {
    MatT<T> h = x;
    for (auto& op : ops_) h = op->forward(h);
    return h;
}

template <class T>
MatT<T> Sequential<T>::backward(const MatT<T>& grad_out) {
    MatT<T> g = grad_out;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) g = (*it)->backward(g);
    return g;
}

template <class T>
std::vector<Param<T>*> Sequential<T>::params() {
    std::vector<Param<T>*> ps;
    for (auto& op : ops_) {
        for (auto* p : op->params()) ps.push_back(p);
    }
    return ps;
}

template <class T>
void Sequential<T>::set_mode(Mode mode) {
    for (auto& op : ops_) op->set_mode(mode);
}

// ---- transformer layer ----------------------------------------------------

template <class T>
TransformerLayer<T>::TransformerLayer(Eigen::Index dim, int heads, Eigen::Index ff_dim,
                                      const std::string& name, Rng& init)
    : ln1_(dim, name + ".ln1"),
      ln2_(dim, name + ".ln2"),
      attn_(dim, heads, name + ".attn", init),
      ff_in_(dim, ff_dim, name + ".ff_in", init),
      ff_out_(ff_dim, dim, name + ".ff_out", init) {}

template <class T>
MatT<T> TransformerLayer<T>::forward(const MatT<T>& x) {
    MatT<T> h = x + attn_.forward(ln1_.forward(x));
    return h + ff_out_.forward(ff_act_.forward(ff_in_.forward(ln2_.forward(h))));
}

template <class T>
MatT<T> TransformerLayer<T>::backward(const MatT<T>& grad_out) {
    MatT<T> gh = grad_out + ln2_.backward(ff_in_.backward(ff_act_.backward(ff_out_.backward(grad_out))));
    return gh + ln1_.backward(attn_.backward(gh));
}

template <class T>
std::vector<Param<T>*> TransformerLayer<T>::params() {
    std::vector<Param<T>*> ps;
    auto append = [&ps](DiffOp<T>& op) {
        for (auto* p : op.params()) ps.push_back(p);
    };
    append(ln1_);
    append(attn_);
    append(ln2_);
    append(ff_in_);
    append(ff_out_);
    return ps;
}

#define UMC_INSTANTIATE(T)                                                         \
    template class Linear<T>;                                                      \
    template class Gelu<T>;                                                        \
    template class Relu<T>;                                                        \
    template class Dropout<T>;                                                     \
    template class LayerNorm<T>;                                                   \
    template class RowNormalize<T>;                                                \
    template class SelfAttention<T>;                                               \
    template class Sequential<T>;                                                  \
    template class TransformerLayer<T>;                                            \
    template MatT<T> dropout_mask<T>(Eigen::Index, Eigen::Index, double, Rng&);

UMC_INSTANTIATE(float)
UMC_INSTANTIATE(double)

#undef UMC_INSTANTIATE

}  // namespace umc
