#pragma once

// Trainable building blocks with hand-written backward passes.
//
// Every op maps a batch matrix (one row per sample or sequence position) to another
// batch matrix. forward() caches whatever backward() needs; backward() must be called
// with the gradient of the most recent forward() and accumulates parameter gradients
// into Param::grad.

#include "umc/numerics.hpp"

#include <memory>
#include <string>
#include <vector>

namespace umc {

enum class Mode { Train, Eval };

template <class T>
struct Param {
    std::string name;
    MatT<T> value;
    MatT<T> grad;
};

template <class T>
class DiffOp {
public:
    virtual ~DiffOp() = default;

    virtual MatT<T> forward(const MatT<T>& x) = 0;
    virtual MatT<T> backward(const MatT<T>& grad_out) = 0;
    virtual std::vector<Param<T>*> params() { return {}; }
    virtual void set_mode(Mode) {}

    void zero_grad() {
        for (auto* p : params()) p->grad.setZero();
    }
};

/// y = x W^T + b, with W stored as (out x in).
template <class T>
class Linear final : public DiffOp<T> {
public:
    Linear(Eigen::Index in, Eigen::Index out, std::string name, Rng& init);

    MatT<T> forward(const MatT<T>& x) override;
    MatT<T> backward(const MatT<T>& grad_out) override;
    std::vector<Param<T>*> params() override { return {&weight_, &bias_}; }

    Param<T>& weight() { return weight_; }
    Param<T>& bias() { return bias_; }
    Eigen::Index in_dim() const { return weight_.value.cols(); }
    Eigen::Index out_dim() const { return weight_.value.rows(); }

private:
    Param<T> weight_;
    Param<T> bias_;
    MatT<T> input_;
};

/// Exact (erf-based) GELU.
template <class T>
class Gelu final : public DiffOp<T> {
public:
    MatT<T> forward(const MatT<T>& x) override;
    MatT<T> backward(const MatT<T>& grad_out) override;

private:
    MatT<T> input_;
};

template <class T>
class Relu final : public DiffOp<T> {
public:
    MatT<T> forward(const MatT<T>& x) override;
    MatT<T> backward(const MatT<T>& grad_out) override;

private:
    MatT<T> input_;
};

/// Inverted dropout. Identity in eval mode. freeze() replays the last mask, which is how
/// gradient checks keep the op deterministic in train mode.
template <class T>
class Dropout final : public DiffOp<T> {
public:
    Dropout(double rate, Rng rng);

    MatT<T> forward(const MatT<T>& x) override;
    MatT<T> backward(const MatT<T>& grad_out) override;
    void set_mode(Mode mode) override { mode_ = mode; }

    void freeze(bool frozen) { frozen_ = frozen; }
    double rate() const { return rate_; }

private:
    double rate_;
    Rng rng_;
    Mode mode_ = Mode::Train;
    bool frozen_ = false;
    MatT<T> mask_;  // already scaled by 1/(1-rate)
};

/// Draws an inverted-dropout mask: each entry is 0 with probability `rate`, else 1/(1-rate).
template <class T>
MatT<T> dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng);

template <class T>
class LayerNorm final : public DiffOp<T> {
public:
    LayerNorm(Eigen::Index dim, std::string name, double eps = 1e-5);

    MatT<T> forward(const MatT<T>& x) override;
    MatT<T> backward(const MatT<T>& grad_out) override;
    std::vector<Param<T>*> params() override { return {&gamma_, &beta_}; }

private:
    Param<T> gamma_;
    Param<T> beta_;
    double eps_;
    MatT<T> xhat_;
    VecT<T> inv_std_;
};

/// L2-normalizes each row; a zero row raises NormZero.
template <class T>
class RowNormalize final : public DiffOp<T> {
public:
    MatT<T> forward(const MatT<T>& x) override;
    MatT<T> backward(const MatT<T>& grad_out) override;

private:
    MatT<T> output_;
    VecT<T> norms_;
};

/// A batch of B sequences stacked as B*seq_len rows. Positions at or beyond a sequence's
/// true length are padding.
struct SequenceLayout {
    Eigen::Index seq_len = 1;
    std::vector<int> lengths;

    Eigen::Index batch() const { return static_cast<Eigen::Index>(lengths.size()); }
};

/// Multi-head self-attention over each sequence of the layout. Padded key positions are
/// masked out, so valid rows never depend on padding values.
template <class T>
class SelfAttention final : public DiffOp<T> {
public:
    SelfAttention(Eigen::Index dim, int heads, const std::string& name, Rng& init);

    void set_layout(const SequenceLayout& layout) { layout_ = layout; }
    MatT<T> forward(const MatT<T>& x) override;
    MatT<T> backward(const MatT<T>& grad_out) override;
    std::vector<Param<T>*> params() override;

    Linear<T>& out_proj() { return out_; }

private:
    int heads_;
    Eigen::Index head_dim_;
    Linear<T> q_, k_, v_, out_;
    SequenceLayout layout_;
    MatT<T> queries_, keys_, values_;
    std::vector<MatT<T>> probs_;  // one (L x L) block per (sequence, head)
};

/// Applies ops in order.
template <class T>
class Sequential final : public DiffOp<T> {
public:
    Sequential() = default;

    template <class Op, class... Args>
    Op& add(Args&&... args) {
        auto op = std::make_unique<Op>(std::forward<Args>(args)...);
        Op& ref = *op;
        ops_.push_back(std::move(op));
        return ref;
    }

    MatT<T> forward(const MatT<T>& x) override;
    MatT<T> backward(const MatT<T>& grad_out) override;
    std::vector<Param<T>*> params() override;
    void set_mode(Mode mode) override;

    DiffOp<T>& at(std::size_t i) { return *ops_.at(i); }
    std::size_t size() const { return ops_.size(); }

private:
    std::vector<std::unique_ptr<DiffOp<T>>> ops_;
};

/// Pre-norm residual block: h = x + Attn(LN(x)); y = h + FFN(LN(h)).
template <class T>
class TransformerLayer final : public DiffOp<T> {
public:
    TransformerLayer(Eigen::Index dim, int heads, Eigen::Index ff_dim, const std::string& name,
                     Rng& init);

    void set_layout(const SequenceLayout& layout) { attn_.set_layout(layout); }
    MatT<T> forward(const MatT<T>& x) override;
    MatT<T> backward(const MatT<T>& grad_out) override;
    std::vector<Param<T>*> params() override;

    SelfAttention<T>& attention() { return attn_; }
    Linear<T>& ff_out() { return ff_out_; }

private:
    LayerNorm<T> ln1_, ln2_;
    SelfAttention<T> attn_;
    Linear<T> ff_in_;
    Gelu<T> ff_act_;
    Linear<T> ff_out_;
};

}  // namespace umc
