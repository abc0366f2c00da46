#pragma once

#include "umc/data_io.hpp"
#include "umc/layers.hpp"

#include <span>

namespace umc {

struct EncoderConfig {
    int d_h = 64;
    int heads = 2;
    int layers = 1;
    int ff_dim = 0;        // 0 means 4 * d_h
    double dropout = 0.1;  // fusion dropout, also the text-only view dropout
    int d_p = 0;           // projection dim of contrastive heads; 0 means d_h

    int resolved_ff_dim() const { return ff_dim > 0 ? ff_dim : 4 * d_h; }
    int resolved_d_p() const { return d_p > 0 ? d_p : d_h; }
    void validate() const;
};

/// f_M followed by a stack of attention layers; emits the last unpadded position of each
/// sequence (B x d_h).
template <class T>
class SequenceEncoder final : public DiffOp<T> {
public:
    SequenceEncoder(Eigen::Index in_dim, const EncoderConfig& cfg, const std::string& name, Rng& init);

    void set_layout(const SequenceLayout& layout);
    MatT<T> forward(const MatT<T>& x) override;
    MatT<T> backward(const MatT<T>& grad_out) override;
    std::vector<Param<T>*> params() override;

    Linear<T>& projection() { return proj_; }
    TransformerLayer<T>& layer(std::size_t i) { return layers_.at(i); }

private:
    Linear<T> proj_;
    std::vector<TransformerLayer<T>> layers_;
    SequenceLayout layout_;
    Eigen::Index hidden_rows_ = 0;
    Eigen::Index hidden_cols_ = 0;
};

/// W1 * GELU(Dropout(x)) + b1 over concatenated [z_T, z_A, z_V] rows.
template <class T>
class FusionLayer final : public DiffOp<T> {
public:
    FusionLayer(Eigen::Index d_h, double dropout, const std::string& name, Rng& init, Rng dropout_rng);

    MatT<T> forward(const MatT<T>& x) override;
    MatT<T> backward(const MatT<T>& grad_out) override;
    std::vector<Param<T>*> params() override { return linear_.params(); }
    void set_mode(Mode mode) override { dropout_.set_mode(mode); }

    Dropout<T>& dropout() { return dropout_; }
    Linear<T>& linear() { return linear_; }

private:
    Dropout<T> dropout_;
    Gelu<T> act_;
    Linear<T> linear_;
};

/// Two-layer projection head with ReLU between the layers.
template <class T>
class ContrastiveHead final : public DiffOp<T> {
public:
    ContrastiveHead(Eigen::Index d_h, Eigen::Index d_p, const std::string& name, Rng& init);

    MatT<T> forward(const MatT<T>& x) override;
    MatT<T> backward(const MatT<T>& grad_out) override;
    std::vector<Param<T>*> params() override;

private:
    Linear<T> first_;
    Relu<T> act_;
    Linear<T> second_;
};

/// Stacked model inputs for a minibatch.
template <class T>
struct ModelBatch {
    MatT<T> text;   // B x D_T
    MatT<T> audio;  // B*L_A x D_A
    MatT<T> video;  // B*L_V x D_V
    SequenceLayout audio_layout;
    SequenceLayout video_layout;

    Eigen::Index size() const { return text.rows(); }
};

template <class T>
ModelBatch<T> make_batch(const FeatureSet& fs, std::span<const std::size_t> indices);

/// All trainable parameters: the encoders, the fusion layer and three contrastive heads
/// (pretraining, high-quality supervised, low-quality unsupervised).
template <class T>
class UmcModel {
public:
    UmcModel(const FeatureDims& dims, const EncoderConfig& cfg, std::uint64_t seed);

    const EncoderConfig& config() const { return cfg_; }
    const FeatureDims& dims() const { return dims_; }

    void set_mode(Mode mode);
    Mode mode() const { return mode_; }

    /// Replaces the heads used during curriculum training with fresh initializations.
    void reset_training_heads(std::uint64_t seed);

    std::vector<Param<T>*> encoder_params();
    std::vector<Param<T>*> all_params();
    void zero_grad();

    // Multimodal path. Rows of the view matrix are laid out view-major:
    // [z_TAV (B rows); z_TA0 (B rows); z_T0V (B rows)].
    MatT<T> forward_views(const ModelBatch<T>& batch);
    void backward_views(const MatT<T>& grad_views);

    /// z_TAV only (B x d_h).
    MatT<T> forward_fused(const ModelBatch<T>& batch);
    void backward_fused(const MatT<T>& grad);

    // Text-only path: z_T = f_T(x_T); two dropout views stacked as [view1; view2].
    MatT<T> forward_text(const ModelBatch<T>& batch);
    void backward_text(const MatT<T>& grad);
    MatT<T> forward_text_views(const ModelBatch<T>& batch);
    void backward_text_views(const MatT<T>& grad_views);

    Linear<T> text_proj;
    SequenceEncoder<T> audio_encoder;
    SequenceEncoder<T> video_encoder;
    FusionLayer<T> fusion;
    Dropout<T> text_dropout;
    ContrastiveHead<T> head_pretrain;  // φ1
    ContrastiveHead<T> head_high;      // φ2
    ContrastiveHead<T> head_low;       // φ3

private:
    UmcModel(const FeatureDims& dims, const EncoderConfig& cfg, std::uint64_t seed, Rng init);
    void encode_all(const ModelBatch<T>& batch, MatT<T>& z_t, MatT<T>& z_a, MatT<T>& z_v);
    void backward_encoders(const MatT<T>& g_t, const MatT<T>& g_a, const MatT<T>& g_v);

    FeatureDims dims_;
    EncoderConfig cfg_;
    Mode mode_ = Mode::Train;
    Eigen::Index batch_rows_ = 0;
};

template <class T>
struct FusedEmbedding {
    std::size_t id = 0;
    VecT<T> z_tav, z_ta0, z_t0v;
};

// Single-sample entry points over the batched model.

/// z_M for one audio or video sequence (true length `len`, padded to L rows).
template <class T>
VecT<T> encode_modality(UmcModel<T>& model, const MatF& sequence, int len, Modality modality, Mode mode);

template <class T>
VecT<T> encode_text(UmcModel<T>& model, const MatF& text);

template <class T>
VecT<T> fuse(UmcModel<T>& model, const VecT<T>& z_t, const VecT<T>& z_a, const VecT<T>& z_v, Mode mode);

template <class T>
FusedEmbedding<T> make_views(UmcModel<T>& model, const FeatureRecord& record, Mode mode);

}  // namespace umc
