#include "umc/encoder.hpp"

namespace umc {

void EncoderConfig::validate() const {
    if (d_h <= 0) throw Error(ErrorCode::BadConfig, "model.d_h must be positive");
    if (heads <= 0 || d_h % heads != 0) throw Error(ErrorCode::BadConfig, "model.heads must divide model.d_h");
    if (layers < 0) throw Error(ErrorCode::BadConfig, "model.layers must be non-negative");
    if (ff_dim < 0 || d_p < 0) throw Error(ErrorCode::BadConfig, "model.ff_dim and model.d_p must be non-negative");
    if (resolved_d_p() < 2) throw Error(ErrorCode::BadConfig, "projection dim must exceed 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorCode::BadConfig, "model.dropout must be in [0,1)");
}

// ---- SequenceEncoder ------------------------------------------------------

template <class T>
SequenceEncoder<T>::SequenceEncoder(Eigen::Index in_dim, const EncoderConfig& cfg, const std::string& name,
                                    Rng& init)
    : proj_(in_dim, cfg.d_h, name + ".proj", init) {
    layers_.reserve(static_cast<std::size_t>(cfg.layers));
    for (int i = 0; i < cfg.layers; ++i) {
        layers_.emplace_back(cfg.d_h, cfg.heads, cfg.resolved_ff_dim(), name + ".layer" + std::to_string(i), init);
    }
}

template <class T>
void SequenceEncoder<T>::set_layout(const SequenceLayout& layout) {
    layout_ = layout;
    for (auto& l : layers_) l.set_layout(layout);
}

template <class T>
MatT<T> SequenceEncoder<T>::forward(const MatT<T>& x) {
    const Eigen::Index L = layout_.seq_len;
    const Eigen::Index B = layout_.batch();
    if (x.rows() != B * L) throw Error(ErrorCode::DimMismatch, "sequence batch does not match its layout");
    for (int len : layout_.lengths) {
        if (len <= 0) throw Error(ErrorCode::EmptySequence, "sequence is entirely padding");
        if (len > L) throw Error(ErrorCode::DimMismatch, "true length exceeds sequence length");
    }
    MatT<T> h = proj_.forward(x);
    for (auto& l : layers_) h = l.forward(h);
    hidden_rows_ = h.rows();
    hidden_cols_ = h.cols();
    MatT<T> pooled(B, h.cols());
    for (Eigen::Index b = 0; b < B; ++b) pooled.row(b) = h.row(b * L + layout_.lengths[static_cast<std::size_t>(b)] - 1);
    return pooled;
}

template <class T>
MatT<T> SequenceEncoder<T>::backward(const MatT<T>& grad_out) {
    const Eigen::Index L = layout_.seq_len;
    MatT<T> g = MatT<T>::Zero(hidden_rows_, hidden_cols_);
    for (Eigen::Index b = 0; b < layout_.batch(); ++b) {
        g.row(b * L + layout_.lengths[static_cast<std::size_t>(b)] - 1) = grad_out.row(b);
    }
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = it->backward(g);
    return proj_.backward(g);
}

template <class T>
std::vector<Param<T>*> SequenceEncoder<T>::params() {
    auto ps = proj_.params();
    for (auto& l : layers_) {
        for (auto* p : l.params()) ps.push_back(p);
    }
    return ps;
}

// ---- FusionLayer ----------------------------------------------------------

template <class T>
FusionLayer<T>::FusionLayer(Eigen::Index d_h, double dropout, const std::string& name, Rng& init, Rng dropout_rng)
    : dropout_(dropout, std::move(dropout_rng)), linear_(3 * d_h, d_h, name, init) {}

template <class T>
MatT<T> FusionLayer<T>::forward(const MatT<T>& x) {
    if (x.cols() != linear_.in_dim()) throw Error(ErrorCode::DimMismatch, "fusion expects 3*d_h columns");
    return linear_.forward(act_.forward(dropout_.forward(x)));
}

template <class T>
MatT<T> FusionLayer<T>::backward(const MatT<T>& grad_out) {
    return dropout_.backward(act_.backward(linear_.backward(grad_out)));
}

// ---- ContrastiveHead ------------------------------------------------------

template <class T>
ContrastiveHead<T>::ContrastiveHead(Eigen::Index d_h, Eigen::Index d_p, const std::string& name, Rng& init)
    : first_(d_h, d_h, name + ".0", init), second_(d_h, d_p, name + ".1", init) {}

template <class T>
MatT<T> ContrastiveHead<T>::forward(const MatT<T>& x) {
    return second_.forward(act_.forward(first_.forward(x)));
}

template <class T>
MatT<T> ContrastiveHead<T>::backward(const MatT<T>& grad_out) {
    return first_.backward(act_.backward(second_.backward(grad_out)));
}

template <class T>
std::vector<Param<T>*> ContrastiveHead<T>::params() {
    auto ps = first_.params();
    for (auto* p : second_.params()) ps.push_back(p);
    return ps;
}

// ---- batching -------------------------------------------------------------

template <class T>
ModelBatch<T> make_batch(const FeatureSet& fs, std::span<const std::size_t> indices) {
    const auto& d = fs.dims;
    const auto B = static_cast<Eigen::Index>(indices.size());
    ModelBatch<T> b;
    b.text.resize(B, d.text_dim);
    b.audio.resize(B * d.audio_len, d.audio_dim);
    b.video.resize(B * d.video_len, d.video_dim);
    b.audio_layout.seq_len = d.audio_len;
    b.video_layout.seq_len = d.video_len;
    for (Eigen::Index i = 0; i < B; ++i) {
        const FeatureRecord& r = fs.records.at(indices[static_cast<std::size_t>(i)]);
        b.text.row(i) = r.text.row(0).template cast<T>();
        b.audio.middleRows(i * d.audio_len, d.audio_len) = r.audio.template cast<T>();
        b.video.middleRows(i * d.video_len, d.video_len) = r.video.template cast<T>();
        b.audio_layout.lengths.push_back(r.audio_len);
        b.video_layout.lengths.push_back(r.video_len);
    }
    return b;
}

// ---- UmcModel -------------------------------------------------------------

namespace {

Rng& validated(Rng& rng, const EncoderConfig& cfg) {
    cfg.validate();
    return rng;
}

}  // namespace

template <class T>
UmcModel<T>::UmcModel(const FeatureDims& dims, const EncoderConfig& cfg, std::uint64_t seed)
    : UmcModel(dims, cfg, seed, Rng(seed, "init")) {}

template <class T>
UmcModel<T>::UmcModel(const FeatureDims& dims, const EncoderConfig& cfg, std::uint64_t seed, Rng init)
    : text_proj(dims.text_dim, cfg.d_h, "text.proj", validated(init, cfg)),
      audio_encoder(dims.audio_dim, cfg, "audio", init),
      video_encoder(dims.video_dim, cfg, "video", init),
      fusion(cfg.d_h, cfg.dropout, "fusion", init, Rng(seed, "dropout.fusion")),
      text_dropout(cfg.dropout, Rng(seed, "dropout.text")),
      head_pretrain(cfg.d_h, cfg.resolved_d_p(), "head.pretrain", init),
      head_high(cfg.d_h, cfg.resolved_d_p(), "head.high", init),
      head_low(cfg.d_h, cfg.resolved_d_p(), "head.low", init),
      dims_(dims),
      cfg_(cfg) {}

template <class T>
void UmcModel<T>::set_mode(Mode mode) {
    mode_ = mode;
    fusion.set_mode(mode);
    text_dropout.set_mode(mode);
}

template <class T>
void UmcModel<T>::reset_training_heads(std::uint64_t seed) {
    Rng init(seed, "init.heads");
    head_high = ContrastiveHead<T>(cfg_.d_h, cfg_.resolved_d_p(), "head.high", init);
    head_low = ContrastiveHead<T>(cfg_.d_h, cfg_.resolved_d_p(), "head.low", init);
}

template <class T>
std::vector<Param<T>*> UmcModel<T>::encoder_params() {
    std::vector<Param<T>*> ps;
    for (DiffOp<T>* op : std::initializer_list<DiffOp<T>*>{&text_proj, &audio_encoder, &video_encoder, &fusion}) {
        for (auto* p : op->params()) ps.push_back(p);
    }
    return ps;
}

template <class T>
std::vector<Param<T>*> UmcModel<T>::all_params() {
    auto ps = encoder_params();
    for (DiffOp<T>* op : std::initializer_list<DiffOp<T>*>{&head_pretrain, &head_high, &head_low}) {
        for (auto* p : op->params()) ps.push_back(p);
    }
    return ps;
}

template <class T>
void UmcModel<T>::zero_grad() {
    for (auto* p : all_params()) p->grad.setZero();
}

template <class T>
void UmcModel<T>::encode_all(const ModelBatch<T>& batch, MatT<T>& z_t, MatT<T>& z_a, MatT<T>& z_v) {
    z_t = text_proj.forward(batch.text);
    audio_encoder.set_layout(batch.audio_layout);
    z_a = audio_encoder.forward(batch.audio);
    video_encoder.set_layout(batch.video_layout);
    z_v = video_encoder.forward(batch.video);
    batch_rows_ = batch.size();
}

template <class T>
void UmcModel<T>::backward_encoders(const MatT<T>& g_t, const MatT<T>& g_a, const MatT<T>& g_v) {
    text_proj.backward(g_t);
    audio_encoder.backward(g_a);
    video_encoder.backward(g_v);
}

template <class T>
MatT<T> UmcModel<T>::forward_views(const ModelBatch<T>& batch) {
    MatT<T> z_t, z_a, z_v;
    encode_all(batch, z_t, z_a, z_v);
    const Eigen::Index B = batch.size();
    const Eigen::Index D = cfg_.d_h;
    MatT<T> concat = MatT<T>::Zero(3 * B, 3 * D);
    concat.block(0, 0, B, D) = z_t;
    concat.block(0, D, B, D) = z_a;
    concat.block(0, 2 * D, B, D) = z_v;
    concat.block(B, 0, B, D) = z_t;  // TA0: video masked
    concat.block(B, D, B, D) = z_a;
    concat.block(2 * B, 0, B, D) = z_t;  // T0V: audio masked
    concat.block(2 * B, 2 * D, B, D) = z_v;
    return fusion.forward(concat);
}

template <class T>
void UmcModel<T>::backward_views(const MatT<T>& grad_views) {
    const Eigen::Index B = batch_rows_;
    const Eigen::Index D = cfg_.d_h;
    MatT<T> g = fusion.backward(grad_views);
    MatT<T> g_t = g.block(0, 0, B, D) + g.block(B, 0, B, D) + g.block(2 * B, 0, B, D);
    MatT<T> g_a = g.block(0, D, B, D) + g.block(B, D, B, D);
    MatT<T> g_v = g.block(0, 2 * D, B, D) + g.block(2 * B, 2 * D, B, D);
    backward_encoders(g_t, g_a, g_v);
}

template <class T>
MatT<T> UmcModel<T>::forward_fused(const ModelBatch<T>& batch) {
    MatT<T> z_t, z_a, z_v;
    encode_all(batch, z_t, z_a, z_v);
    const Eigen::Index D = cfg_.d_h;
    MatT<T> concat(batch.size(), 3 * D);
    concat << z_t, z_a, z_v;
    return fusion.forward(concat);
}

template <class T>
void UmcModel<T>::backward_fused(const MatT<T>& grad) {
    const Eigen::Index D = cfg_.d_h;
    MatT<T> g = fusion.backward(grad);
    backward_encoders(g.leftCols(D), g.middleCols(D, D), g.rightCols(D));
}

template <class T>
MatT<T> UmcModel<T>::forward_text(const ModelBatch<T>& batch) {
    batch_rows_ = batch.size();
    return text_proj.forward(batch.text);
}

template <class T>
void UmcModel<T>::backward_text(const MatT<T>& grad) {
    text_proj.backward(grad);
}

template <class T>
MatT<T> UmcModel<T>::forward_text_views(const ModelBatch<T>& batch) {
    MatT<T> z_t = forward_text(batch);
    MatT<T> stacked(2 * z_t.rows(), z_t.cols());
    stacked << z_t, z_t;
    return text_dropout.forward(stacked);
}

template <class T>
void UmcModel<T>::backward_text_views(const MatT<T>& grad_views) {
    const Eigen::Index B = batch_rows_;
    MatT<T> g = text_dropout.backward(grad_views);
    text_proj.backward(g.topRows(B) + g.bottomRows(B));
}

// ---- single-sample entry points ------------------------------------------

template <class T>
VecT<T> encode_modality(UmcModel<T>& model, const MatF& sequence, int len, Modality modality, Mode mode) {
    if (modality != Modality::Audio && modality != Modality::Video) {
        throw Error(ErrorCode::DimMismatch, "encode_modality handles audio or video only");
    }
    model.set_mode(mode);
    auto& enc = modality == Modality::Audio ? model.audio_encoder : model.video_encoder;
    const int want_dim = modality == Modality::Audio ? model.dims().audio_dim : model.dims().video_dim;
    if (sequence.cols() != want_dim) throw Error(ErrorCode::DimMismatch, "sequence feature dim mismatch");
    enc.set_layout({sequence.rows(), {len}});
    MatT<T> out = enc.forward(sequence.template cast<T>());
    return out.row(0).transpose();
}

template <class T>
VecT<T> encode_text(UmcModel<T>& model, const MatF& text) {
    if (text.rows() != 1 || text.cols() != model.dims().text_dim) {
        throw Error(ErrorCode::DimMismatch, "text feature must be 1 x " + std::to_string(model.dims().text_dim));
    }
    MatT<T> out = model.text_proj.forward(text.template cast<T>());
    return out.row(0).transpose();
}

template <class T>
VecT<T> fuse(UmcModel<T>& model, const VecT<T>& z_t, const VecT<T>& z_a, const VecT<T>& z_v, Mode mode) {
    const Eigen::Index D = model.config().d_h;
    if (z_t.size() != D || z_a.size() != D || z_v.size() != D) {
        throw Error(ErrorCode::DimMismatch, "fuse inputs must have dimension d_h");
    }
    model.set_mode(mode);
    MatT<T> concat(1, 3 * D);
    concat << z_t.transpose(), z_a.transpose(), z_v.transpose();
    MatT<T> out = model.fusion.forward(concat);
    return out.row(0).transpose();
}

template <class T>
FusedEmbedding<T> make_views(UmcModel<T>& model, const FeatureRecord& record, Mode mode) {
    FeatureSet single{model.dims(), {record}};
    const std::size_t idx = 0;
    model.set_mode(mode);
    MatT<T> views = model.forward_views(make_batch<T>(single, std::span<const std::size_t>(&idx, 1)));
    return {record.id, views.row(0).transpose(), views.row(1).transpose(), views.row(2).transpose()};
}

#define UMC_INSTANTIATE(T)                                                                                   \
    template class SequenceEncoder<T>;                                                                       \
    template class FusionLayer<T>;                                                                           \
    template class ContrastiveHead<T>;                                                                       \
    template class UmcModel<T>;                                                                              \
    template ModelBatch<T> make_batch<T>(const FeatureSet&, std::span<const std::size_t>);                   \
    template VecT<T> encode_modality<T>(UmcModel<T>&, const MatF&, int, Modality, Mode);                     \
    template VecT<T> encode_text<T>(UmcModel<T>&, const MatF&);                                              \
    template VecT<T> fuse<T>(UmcModel<T>&, const VecT<T>&, const VecT<T>&, const VecT<T>&, Mode);            \
    template FusedEmbedding<T> make_views<T>(UmcModel<T>&, const FeatureRecord&, Mode);

UMC_INSTANTIATE(float)
UMC_INSTANTIATE(double)

#undef UMC_INSTANTIATE

}  // namespace umc
