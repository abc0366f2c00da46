#pragma once

#include "umc/cluster.hpp"
#include "umc/contrastive.hpp"
#include "umc/encoder.hpp"
#include "umc/selection.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>

namespace umc {

enum class Variant { Full, TextOnly };

/// Ablation switches. Each one replaces or removes a single stage of the pipeline.
enum class Ablation {
    None,
    NoPretrain,        // skip contrastive pretraining
    RandomSelection,   // random top-t subset instead of density ranking
    SupervisedOnly,    // no unsupervised pass on low-quality samples
    PretrainKMeans,    // pretrain, then cluster every round without any loss steps
    PretrainUcl,       // pretrain, then unsupervised contrastive loss on all samples
    PretrainMse,       // pretrain, then squared distance to the assigned centroid
};

const char* to_string(Variant v);
const char* to_string(Ablation a);
Variant parse_variant(const std::string& s);
Ablation parse_ablation(const std::string& s);

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

struct TrainConfig {
    double t0 = 0.1;
    double delta = 0.05;
    int batch_size = 128;
    int pretrain_epochs = 10;
    int round_epochs = 1;
    double lr_pretrain = 1e-3;
    double lr_train = 1e-3;
    double tau1 = 0.2;
    double tau2 = 1.4;
    double tau3 = 1.0;
    AdamWConfig adam;
    std::uint64_t seed = 0;
    Variant variant = Variant::Full;
    Ablation ablation = Ablation::None;
    bool share_pretrain_head = false;  // reuse the pretraining head for the low-quality pass

    /// ceil((1 - t0) / delta): rounds run with t = t0, t0 + delta, ... until t reaches 1.
    int num_rounds() const;
    double threshold_at(int round) const;
    void validate() const;
};

/// AdamW with decoupled weight decay. State is keyed by parameter, so heads that sit out
/// a step keep their moments untouched.
class AdamW {
public:
    AdamW(double lr, const AdamWConfig& cfg) : lr_(lr), cfg_(cfg) {}

    void step(const std::vector<Param<float>*>& params);

private:
    struct State {
        MatF m, v;
        long t = 0;
    };
    double lr_;
    AdamWConfig cfg_;
    std::map<const Param<float>*, State> state_;
};

enum class Pass { Pretrain, Supervised, Unsupervised, Mse };

/// Instrumentation hook: sees every minibatch's sample indices.
using BatchObserver = std::function<void(int round, Pass pass, std::span<const std::size_t> indices)>;

struct RoundLog {
    int round = 0;
    double threshold = 0.0;
    double inertia = 0.0;
    int lloyd_iterations = 0;
    std::size_t selected = 0;
    std::size_t complement = 0;
    std::vector<int> k_near;
    double supervised_loss = 0.0;    // mean over minibatches, 0 if no step ran
    double unsupervised_loss = 0.0;
    double mse_loss = 0.0;
};

struct RunArtifacts {
    UmcModel<float> model;
    ClusterState final_state;
    std::vector<RoundLog> log;
    Mat embeddings;  // eval-mode embeddings after training, one row per sample
};

/// Contrastive pretraining with head φ1. Returns the mean loss of each epoch.
std::vector<double> pretrain(const FeatureSet& data, UmcModel<float>& model, const TrainConfig& cfg,
                             const BatchObserver& observer = {});

/// Curriculum rounds: embed, cluster (centroids inherited after round 0), select, then the
/// supervised pass on selected samples followed by the unsupervised pass on the rest.
RunArtifacts curriculum_train(const FeatureSet& data, UmcModel<float> model, const TrainConfig& cfg,
                              const SelectionConfig& selection, int k, const BatchObserver& observer = {});

/// Eval-mode embeddings for every sample (z_TAV, or z_T for the text-only variant).
Mat embed_all(const FeatureSet& data, UmcModel<float>& model, Variant variant);

/// Fresh K-Means++ on the trained embeddings.
std::vector<int> infer(const FeatureSet& data, UmcModel<float>& model, Variant variant, int k, std::uint64_t seed);

/// Shuffled minibatches over `indices`; a trailing batch with fewer than 2 samples is dropped.
std::vector<std::vector<std::size_t>> make_minibatches(std::vector<std::size_t> indices, int batch_size, Rng& rng);

}  // namespace umc
