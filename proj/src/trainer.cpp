#include "umc/trainer.hpp"

#include <cmath>
#include <numeric>

namespace umc {

const char* to_string(Variant v) {
    switch (v) {
        case Variant::Full: return "full";
        case Variant::TextOnly: return "text_only";
    }
    return "unknown";
}

const char* to_string(Ablation a) {
    switch (a) {
        case Ablation::None: return "none";
        case Ablation::NoPretrain: return "no_pretrain";
        case Ablation::RandomSelection: return "random_step2";
        case Ablation::SupervisedOnly: return "scl_only";
        case Ablation::PretrainKMeans: return "step1_kmeans";
        case Ablation::PretrainUcl: return "step1_ucl";
        case Ablation::PretrainMse: return "step1_mse";
    }
    return "unknown";
}

Variant parse_variant(const std::string& s) {
    if (s == "full") return Variant::Full;
    if (s == "text_only") return Variant::TextOnly;
    throw Error(ErrorCode::BadConfig, "unknown variant: " + s);
}

Ablation parse_ablation(const std::string& s) {
    for (auto a : {Ablation::None, Ablation::NoPretrain, Ablation::RandomSelection, Ablation::SupervisedOnly,
                   Ablation::PretrainKMeans, Ablation::PretrainUcl, Ablation::PretrainMse}) {
        if (s == to_string(a)) return a;
    }
    throw Error(ErrorCode::BadConfig, "unknown ablation: " + s);
}

int TrainConfig::num_rounds() const {
    // The small slack keeps e.g. 0.9 / 0.05 = 17.999999999999996 at 18.
    double r = std::ceil((1.0 - t0) / delta - 1e-9);
    return std::max(0, static_cast<int>(r));
}

double TrainConfig::threshold_at(int round) const { return std::min(1.0, t0 + delta * round); }

void TrainConfig::validate() const {
    if (!(t0 >= 0.0 && t0 <= 1.0)) throw Error(ErrorCode::BadConfig, "train.t0 must be in [0,1]");
    if (!(delta > 0.0)) throw Error(ErrorCode::BadConfig, "train.delta must be positive");
    if (batch_size < 2) throw Error(ErrorCode::BadConfig, "train.batch_size must be at least 2");
    if (pretrain_epochs < 0 || round_epochs < 0) throw Error(ErrorCode::BadConfig, "epoch counts must be non-negative");
    if (!(lr_pretrain >= 0.0 && lr_train >= 0.0)) throw Error(ErrorCode::BadConfig, "learning rates must be non-negative");
    if (!(tau1 > 0.0 && tau2 > 0.0 && tau3 > 0.0)) throw Error(ErrorCode::BadConfig, "temperatures must be positive");
}

void AdamW::step(const std::vector<Param<float>*>& params) {
    const auto b1 = static_cast<float>(cfg_.beta1);
    const auto b2 = static_cast<float>(cfg_.beta2);
    const auto eps = static_cast<float>(cfg_.eps);
    const auto lr = static_cast<float>(lr_);
    const auto decay = static_cast<float>(lr_ * cfg_.weight_decay);
    for (auto* p : params) {
        State& s = state_[p];
        if (s.t == 0) {
            s.m = MatF::Zero(p->value.rows(), p->value.cols());
            s.v = MatF::Zero(p->value.rows(), p->value.cols());
        }
        ++s.t;
        s.m = b1 * s.m + (1.0f - b1) * p->grad;
        s.v = b2 * s.v + (1.0f - b2) * p->grad.cwiseProduct(p->grad);
        const float c1 = 1.0f - std::pow(b1, static_cast<float>(s.t));
        const float c2 = 1.0f - std::pow(b2, static_cast<float>(s.t));
        p->value *= (1.0f - decay);
        p->value.array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + eps);
    }
}

std::vector<std::vector<std::size_t>> make_minibatches(std::vector<std::size_t> indices, int batch_size, Rng& rng) {
    rng.shuffle(indices.begin(), indices.end());
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < indices.size(); start += static_cast<std::size_t>(batch_size)) {
        std::size_t end = std::min(indices.size(), start + static_cast<std::size_t>(batch_size));
        if (end - start < 2) break;
        batches.emplace_back(indices.begin() + static_cast<std::ptrdiff_t>(start),
                             indices.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

namespace {

std::vector<Param<float>*> concat(std::vector<Param<float>*> a, const std::vector<Param<float>*>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

std::vector<Param<float>*> trainable_encoder(UmcModel<float>& model, Variant variant) {
    return variant == Variant::TextOnly ? model.text_proj.params() : model.encoder_params();
}

enum class LossKind { Unsupervised, Supervised };

// One contrastive step over a minibatch: encode views, project with `head`, normalize,
// apply the loss and push gradients back through the head and the encoders.
float contrastive_step(const FeatureSet& data, UmcModel<float>& model, Variant variant, ContrastiveHead<float>& head,
                       LossKind kind, double tau, std::span<const std::size_t> idx,
                       const std::vector<int>* row_labels, AdamW& opt,
                       const std::vector<Param<float>*>& active) {
    for (auto* p : active) p->grad.setZero();
    model.set_mode(Mode::Train);
    auto batch = make_batch<float>(data, idx);
    const bool text_only = variant == Variant::TextOnly;
    MatF views = text_only ? model.forward_text_views(batch) : model.forward_views(batch);
    MatF projected = head.forward(views);
    RowNormalize<float> norm;
    MatF normalized = norm.forward(projected);

    std::vector<int> labels;
    if (row_labels) {
        labels.reserve(idx.size());
        for (auto i : idx) labels.push_back((*row_labels)[i]);
    }
    auto vb = make_view_batch<float>(std::move(normalized), text_only ? 2 : 3, row_labels ? &labels : nullptr);
    LossResult<float> loss = kind == LossKind::Supervised ? mscl_loss(vb, tau) : ucl_loss(vb, tau);

    MatF g = head.backward(norm.backward(loss.grad));
    if (text_only) {
        model.backward_text_views(g);
    } else {
        model.backward_views(g);
    }
    opt.step(active);
    return loss.value;
}

float mse_step(const FeatureSet& data, UmcModel<float>& model, Variant variant, const ClusterState& state,
               std::span<const std::size_t> idx, AdamW& opt, const std::vector<Param<float>*>& active) {
    for (auto* p : active) p->grad.setZero();
    model.set_mode(Mode::Train);
    auto batch = make_batch<float>(data, idx);
    const bool text_only = variant == Variant::TextOnly;
    MatF z = text_only ? model.forward_text(batch) : model.forward_fused(batch);
    MatF targets(z.rows(), z.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        targets.row(static_cast<Eigen::Index>(r)) =
            state.centroids.row(state.assignments[idx[r]]).cast<float>();
    }
    auto loss = centroid_mse_loss<float>(z, targets);
    if (text_only) {
        model.backward_text(loss.grad);
    } else {
        model.backward_fused(loss.grad);
    }
    opt.step(active);
    return loss.value;
}

std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
}

}  // namespace

std::vector<double> pretrain(const FeatureSet& data, UmcModel<float>& model, const TrainConfig& cfg,
                             const BatchObserver& observer) {
    cfg.validate();
    AdamW opt(cfg.lr_pretrain, cfg.adam);
    Rng shuffle(cfg.seed, "shuffle.pretrain");
    auto active = concat(trainable_encoder(model, cfg.variant), model.head_pretrain.params());
    std::vector<double> epoch_losses;
    for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
        double total = 0;
        int steps = 0;
        for (const auto& b : make_minibatches(all_indices(data.size()), cfg.batch_size, shuffle)) {
            if (observer) observer(-1, Pass::Pretrain, b);
            total += contrastive_step(data, model, cfg.variant, model.head_pretrain, LossKind::Unsupervised,
                                      cfg.tau1, b, nullptr, opt, active);
            ++steps;
        }
        epoch_losses.push_back(steps > 0 ? total / steps : 0.0);
    }
    return epoch_losses;
}

Mat embed_all(const FeatureSet& data, UmcModel<float>& model, Variant variant) {
    model.set_mode(Mode::Eval);
    constexpr std::size_t kChunk = 256;
    Mat out(static_cast<Eigen::Index>(data.size()), model.config().d_h);
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < data.size(); start += kChunk) {
        idx.clear();
        for (std::size_t i = start; i < std::min(data.size(), start + kChunk); ++i) idx.push_back(i);
        auto batch = make_batch<float>(data, idx);
        MatF z = variant == Variant::TextOnly ? model.forward_text(batch) : model.forward_fused(batch);
        out.middleRows(static_cast<Eigen::Index>(start), z.rows()) = z.cast<double>();
    }
    model.set_mode(Mode::Train);
    return out;
}

RunArtifacts curriculum_train(const FeatureSet& data, UmcModel<float> model, const TrainConfig& cfg,
                              const SelectionConfig& selection, int k, const BatchObserver& observer) {
    cfg.validate();
    selection.validate();
    model.reset_training_heads(cfg.seed);
    if (cfg.share_pretrain_head) model.head_low = model.head_pretrain;

    const Variant variant = cfg.variant;
    const auto encoder = trainable_encoder(model, variant);
    const auto high_active = concat(encoder, model.head_high.params());
    const auto low_active = concat(encoder, model.head_low.params());
    AdamW opt(cfg.lr_train, cfg.adam);
    Rng kmeans_rng(cfg.seed, "kmeans");
    Rng select_rng(cfg.seed, "select");
    Rng shuffle(cfg.seed, "shuffle.train");

    std::vector<RoundLog> log;
    std::optional<ClusterState> prev;
    const int rounds = cfg.num_rounds();
    for (int r = 0; r < rounds; ++r) {
        RoundLog entry;
        entry.round = r;
        entry.threshold = cfg.threshold_at(r);

        Mat z = embed_all(data, model, variant);
        ClusterState state = cluster_round(z, prev ? &*prev : nullptr, k, kmeans_rng);
        entry.inertia = state.inertia;
        entry.lloyd_iterations = state.iterations;

        auto mean_over = [&](Pass pass, const std::vector<std::size_t>& pool, auto&& step) {
            double total = 0;
            int steps = 0;
            for (int e = 0; e < cfg.round_epochs; ++e) {
                for (const auto& b : make_minibatches(pool, cfg.batch_size, shuffle)) {
                    if (observer) observer(r, pass, b);
                    total += step(b);
                    ++steps;
                }
            }
            return steps > 0 ? total / steps : 0.0;
        };

        switch (cfg.ablation) {
            case Ablation::PretrainKMeans:
                break;
            case Ablation::PretrainMse:
                entry.mse_loss = mean_over(Pass::Mse, all_indices(data.size()), [&](const auto& b) {
                    return mse_step(data, model, variant, state, b, opt, encoder);
                });
                break;
            case Ablation::PretrainUcl:
                entry.unsupervised_loss = mean_over(Pass::Unsupervised, all_indices(data.size()), [&](const auto& b) {
                    return contrastive_step(data, model, variant, model.head_low, LossKind::Unsupervised, cfg.tau3, b,
                                            nullptr, opt, low_active);
                });
                break;
            default: {
                SelectionConfig sc = selection;
                sc.threshold = entry.threshold;
                if (cfg.ablation == Ablation::RandomSelection) sc.mode = SelectionMode::Random;
                SelectionResult sel = select_all(z, state, sc, select_rng);
                entry.selected = sel.selected.size();
                entry.complement = sel.complement.size();
                entry.k_near = sel.k_near;
                // Epochs interleave: supervised pass on Idx', then unsupervised pass on the rest.
                double sup_total = 0, unsup_total = 0;
                int sup_steps = 0, unsup_steps = 0;
                for (int e = 0; e < cfg.round_epochs; ++e) {
                    for (const auto& b : make_minibatches(sel.selected, cfg.batch_size, shuffle)) {
                        if (observer) observer(r, Pass::Supervised, b);
                        sup_total += contrastive_step(data, model, variant, model.head_high, LossKind::Supervised,
                                                      cfg.tau2, b, &state.assignments, opt, high_active);
                        ++sup_steps;
                    }
                    if (cfg.ablation == Ablation::SupervisedOnly || sel.complement.empty()) continue;
                    for (const auto& b : make_minibatches(sel.complement, cfg.batch_size, shuffle)) {
                        if (observer) observer(r, Pass::Unsupervised, b);
                        unsup_total += contrastive_step(data, model, variant, model.head_low, LossKind::Unsupervised,
                                                        cfg.tau3, b, nullptr, opt, low_active);
                        ++unsup_steps;
                    }
                }
                entry.supervised_loss = sup_steps > 0 ? sup_total / sup_steps : 0.0;
                entry.unsupervised_loss = unsup_steps > 0 ? unsup_total / unsup_steps : 0.0;
                break;
            }
        }
        log.push_back(std::move(entry));
        prev = std::move(state);
    }

    Mat final_z = embed_all(data, model, variant);
    ClusterState final_state = prev ? std::move(*prev) : ClusterState{};
    return {std::move(model), std::move(final_state), std::move(log), std::move(final_z)};
}

std::vector<int> infer(const FeatureSet& data, UmcModel<float>& model, Variant variant, int k, std::uint64_t seed) {
    Mat z = embed_all(data, model, variant);
    Rng rng(seed, "infer");
    return lloyd(z, kmeanspp_init(z, k, rng)).assignments;
}

}  // namespace umc
