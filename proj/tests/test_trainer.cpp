#include "doctest.h"
#include "test_util.hpp"

#include "umc/config.hpp"
#include "umc/data_io.hpp"
#include "umc/pipeline.hpp"
#include "umc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>

using namespace umc;

namespace {

Dataset small_data(std::uint64_t seed = 0, int per_class = 16) {
    SynthSpec spec;
    spec.num_classes = 3;
    spec.samples_per_class = per_class;
    spec.dims = FeatureDims{6, 5, 4, 5, 4};
    spec.text_separation = 2.0;
    spec.audio_separation = 2.0;
    spec.video_separation = 2.0;
    spec.seed = seed;
    return generate_synthetic(spec);
}

EncoderConfig small_encoder() {
    EncoderConfig e;
    e.d_h = 8;
    e.heads = 2;
    e.ff_dim = 16;
    e.d_p = 8;
    return e;
}

TrainConfig small_train(std::uint64_t seed = 0) {
    TrainConfig t;
    t.batch_size = 16;
    t.pretrain_epochs = 2;
    t.seed = seed;
    return t;
}

bool bitwise_equal(const std::vector<Param<float>*>& a, const std::vector<Param<float>*>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& x = a[i]->value;
        const auto& y = b[i]->value;
        if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
        if (std::memcmp(x.data(), y.data(), sizeof(float) * static_cast<std::size_t>(x.size())) != 0) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("curriculum schedule: 18 rounds from 0.1 in steps of 0.05, terminating at t = 1") {
    TrainConfig cfg;
    CHECK(cfg.num_rounds() == 18);
    CHECK(cfg.threshold_at(0) == doctest::Approx(0.1));
    CHECK(cfg.threshold_at(16) == doctest::Approx(0.9));
    CHECK(cfg.threshold_at(17) == doctest::Approx(0.95));
    CHECK(cfg.threshold_at(cfg.num_rounds()) == 1.0);
    for (int r = 1; r < cfg.num_rounds(); ++r) CHECK(cfg.threshold_at(r) > cfg.threshold_at(r - 1));
}

TEST_CASE("curriculum schedule edge cases") {
    TrainConfig cfg;
    cfg.t0 = 1.0;
    CHECK(cfg.num_rounds() == 0);
    cfg.t0 = 0.0;
    cfg.delta = 0.25;
    CHECK(cfg.num_rounds() == 4);
    CHECK(cfg.threshold_at(3) == doctest::Approx(0.75));
    cfg.t0 = 0.5;
    cfg.delta = 0.3;  // 0.5, 0.8, then clamped to 1
    CHECK(cfg.num_rounds() == 2);
    CHECK(cfg.threshold_at(5) == 1.0);
}

TEST_CASE("train config validation") {
    TrainConfig cfg;
    cfg.delta = 0;
    CHECK_THROWS_CODE(cfg.validate(), ErrorCode::BadConfig);
    cfg = TrainConfig{};
    cfg.batch_size = 1;
    CHECK_THROWS_CODE(cfg.validate(), ErrorCode::BadConfig);
    cfg = TrainConfig{};
    cfg.tau2 = 0;
    CHECK_THROWS_CODE(cfg.validate(), ErrorCode::BadConfig);
    CHECK_THROWS_CODE(parse_ablation("nope"), ErrorCode::BadConfig);
    CHECK_THROWS_CODE(parse_variant("audio"), ErrorCode::BadConfig);
    for (auto a : {Ablation::None, Ablation::NoPretrain, Ablation::RandomSelection, Ablation::SupervisedOnly,
                   Ablation::PretrainKMeans, Ablation::PretrainUcl, Ablation::PretrainMse}) {
        CHECK(parse_ablation(to_string(a)) == a);
    }
}

TEST_CASE("AdamW: zero learning rate leaves parameters bitwise unchanged") {
    UmcModel<float> a(FeatureDims{6, 5, 4, 5, 4}, small_encoder(), 3);
    UmcModel<float> b(FeatureDims{6, 5, 4, 5, 4}, small_encoder(), 3);
    for (auto* p : a.all_params()) p->grad.setConstant(0.7f);
    AdamW opt(0.0, AdamWConfig{});
    opt.step(a.all_params());
    CHECK(bitwise_equal(a.all_params(), b.all_params()));
}

TEST_CASE("AdamW: first step moves each weight by about lr against the gradient sign") {
    Param<float> p{"w", MatF::Constant(2, 3, 1.0f), MatF::Zero(2, 3)};
    p.grad << 1, -1, 2, -2, 0.5f, -0.5f;
    AdamWConfig cfg;
    cfg.weight_decay = 0.0;
    AdamW opt(0.01, cfg);
    opt.step({&p});
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
        const float g = p.grad.data()[i];
        CHECK(p.value.data()[i] == doctest::Approx(1.0 - 0.01 * (g > 0 ? 1 : -1)).epsilon(1e-5));
    }
}

TEST_CASE("AdamW: decoupled decay with zero gradient shrinks by (1 - lr*wd)") {
    Param<float> p{"w", MatF::Constant(1, 2, 2.0f), MatF::Zero(1, 2)};
    AdamWConfig cfg;
    cfg.weight_decay = 0.1;
    AdamW opt(0.5, cfg);
    opt.step({&p});
    CHECK(p.value(0, 0) == doctest::Approx(2.0 * (1 - 0.05)));
}

TEST_CASE("minibatches: shuffled partition, trailing singleton dropped") {
    Rng rng(1, "test");
    std::vector<std::size_t> idx(21);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i * 3;
    auto batches = make_minibatches(idx, 5, rng);
    REQUIRE(batches.size() == 4);  // 5,5,5,5 and a lone leftover dropped
    std::set<std::size_t> seen;
    for (const auto& b : batches) {
        CHECK(b.size() == 5);
        seen.insert(b.begin(), b.end());
    }
    CHECK(seen.size() == 20);

    auto pairs = make_minibatches(std::vector<std::size_t>(22, 0), 5, rng);
    CHECK(pairs.back().size() == 2);
    CHECK(make_minibatches({7}, 5, rng).empty());
}

TEST_CASE("pretraining is deterministic per seed") {
    Dataset data = small_data();
    TrainConfig cfg = small_train(4);
    UmcModel<float> a(data.features.dims, small_encoder(), 4);
    UmcModel<float> b(data.features.dims, small_encoder(), 4);
    auto la = pretrain(data.features, a, cfg);
    auto lb = pretrain(data.features, b, cfg);
    CHECK(la == lb);
    CHECK(bitwise_equal(a.all_params(), b.all_params()));
}

TEST_CASE("pretraining loss decreases over four epochs on most seeds") {
    Dataset data = small_data(0, 24);
    int decreasing = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        TrainConfig cfg = small_train(seed);
        cfg.pretrain_epochs = 4;
        UmcModel<float> model(data.features.dims, small_encoder(), seed);
        auto losses = pretrain(data.features, model, cfg);
        REQUIRE(losses.size() == 4);
        for (double l : losses) CHECK(std::isfinite(l));
        if (losses.back() <= losses.front()) ++decreasing;
    }
    CHECK(decreasing >= 4);
}

TEST_CASE("text-only pretraining touches only the text projection and head") {
    Dataset data = small_data();
    TrainConfig cfg = small_train();
    cfg.variant = Variant::TextOnly;
    UmcModel<float> model(data.features.dims, small_encoder(), 0);
    UmcModel<float> ref(data.features.dims, small_encoder(), 0);
    pretrain(data.features, model, cfg);
    CHECK(bitwise_equal(model.audio_encoder.params(), ref.audio_encoder.params()));
    CHECK(bitwise_equal(model.video_encoder.params(), ref.video_encoder.params()));
    CHECK(bitwise_equal(model.fusion.params(), ref.fusion.params()));
    CHECK_FALSE(bitwise_equal(model.text_proj.params(), ref.text_proj.params()));
}

TEST_CASE("dual learning: supervised batches come from Idx', unsupervised from its complement") {
    Dataset data = small_data(1, 20);
    TrainConfig cfg = small_train(2);
    cfg.batch_size = 8;
    SelectionConfig sel;
    const int rounds = cfg.num_rounds();
    std::vector<std::set<std::size_t>> sup(rounds), unsup(rounds);
    std::size_t pretrain_seen = 0;
    BatchObserver obs = [&](int r, Pass pass, std::span<const std::size_t> b) {
        if (pass == Pass::Pretrain) {
            CHECK(r == -1);
            pretrain_seen += b.size();
            return;
        }
        REQUIRE(r >= 0);
        REQUIRE(r < rounds);
        auto& dst = pass == Pass::Supervised ? sup[r] : unsup[r];
        CHECK((pass == Pass::Supervised || pass == Pass::Unsupervised));
        dst.insert(b.begin(), b.end());
    };
    UmcModel<float> model(data.features.dims, small_encoder(), 2);
    pretrain(data.features, model, cfg, obs);
    CHECK(pretrain_seen > 0);
    auto art = curriculum_train(data.features, std::move(model), cfg, sel, 3, obs);
    REQUIRE(art.log.size() == static_cast<std::size_t>(rounds));
    for (int r = 0; r < rounds; ++r) {
        const auto& log = art.log[r];
        CHECK(log.selected + log.complement == data.size());
        // every supervised index is outside the unsupervised set and vice versa
        for (auto i : sup[r]) CHECK(unsup[r].count(i) == 0);
        CHECK(sup[r].size() <= log.selected);
        CHECK(sup[r].size() + 1 >= log.selected);
        CHECK(unsup[r].size() <= log.complement);
        if (log.complement >= 2) CHECK(unsup[r].size() + 1 >= log.complement);
    }
    CHECK(art.log.back().threshold == doctest::Approx(0.95));
    CHECK(art.log.front().selected < art.log.back().selected);
}

TEST_CASE("ablation step1_kmeans runs no loss steps; step1_mse uses only the MSE pass") {
    Dataset data = small_data();
    SelectionConfig sel;
    for (auto ablation : {Ablation::PretrainKMeans, Ablation::PretrainMse, Ablation::PretrainUcl}) {
        TrainConfig cfg = small_train();
        cfg.ablation = ablation;
        std::set<Pass> passes;
        BatchObserver obs = [&](int, Pass p, std::span<const std::size_t>) { passes.insert(p); };
        UmcModel<float> model(data.features.dims, small_encoder(), 0);
        auto art = curriculum_train(data.features, std::move(model), cfg, sel, 3, obs);
        if (ablation == Ablation::PretrainKMeans) CHECK(passes.empty());
        if (ablation == Ablation::PretrainMse) CHECK(passes == std::set<Pass>{Pass::Mse});
        if (ablation == Ablation::PretrainUcl) CHECK(passes == std::set<Pass>{Pass::Unsupervised});
        CHECK(art.log.size() == 18u);
    }
}

TEST_CASE("scl_only skips the unsupervised pass") {
    Dataset data = small_data();
    TrainConfig cfg = small_train();
    cfg.ablation = Ablation::SupervisedOnly;
    std::set<Pass> passes;
    BatchObserver obs = [&](int, Pass p, std::span<const std::size_t>) { passes.insert(p); };
    UmcModel<float> model(data.features.dims, small_encoder(), 0);
    curriculum_train(data.features, std::move(model), cfg, SelectionConfig{}, 3, obs);
    CHECK(passes == std::set<Pass>{Pass::Supervised});
}

TEST_CASE("curriculum with t0 = 1 runs zero rounds") {
    Dataset data = small_data();
    TrainConfig cfg = small_train();
    cfg.t0 = 1.0;
    UmcModel<float> model(data.features.dims, small_encoder(), 0);
    auto art = curriculum_train(data.features, std::move(model), cfg, SelectionConfig{}, 3);
    CHECK(art.log.empty());
    CHECK(art.embeddings.rows() == static_cast<Eigen::Index>(data.size()));
}

TEST_CASE("inference is deterministic and k = 1 gives one cluster") {
    Dataset data = small_data();
    UmcModel<float> model(data.features.dims, small_encoder(), 0);
    auto a = infer(data.features, model, Variant::Full, 3, 11);
    auto b = infer(data.features, model, Variant::Full, 3, 11);
    CHECK(a == b);
    auto one = infer(data.features, model, Variant::Full, 1, 11);
    CHECK(std::all_of(one.begin(), one.end(), [](int c) { return c == 0; }));
    Mat z = embed_all(data.features, model, Variant::TextOnly);
    CHECK(z.rows() == static_cast<Eigen::Index>(data.size()));
    CHECK(z.cols() == small_encoder().d_h);
}

TEST_CASE("full pipeline is bitwise reproducible and independent of thread count") {
    Dataset data = small_data(5);
    RunConfig cfg = desk_defaults();
    cfg.encoder = small_encoder();
    cfg.train.batch_size = 16;
    cfg.train.pretrain_epochs = 2;
    cfg.seeds = {0, 1};
    RunReport a = run_all(data, cfg, 1);
    RunReport b = run_all(data, cfg, 2);
    REQUIRE(a.seeds.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(a.seeds[i].assignments == b.seeds[i].assignments);
        CHECK(a.seeds[i].pretrain_losses == b.seeds[i].pretrain_losses);
        CHECK(bitwise_equal(a.seeds[i].artifacts.model.all_params(), b.seeds[i].artifacts.model.all_params()));
    }
    CHECK(report_json(a) == report_json(b));
    CHECK(report_csv(a) == report_csv(b));
}

TEST_CASE("pipeline: summary statistics and csv layout") {
    Dataset data = small_data(2);
    RunConfig cfg = desk_defaults();
    cfg.encoder = small_encoder();
    cfg.train.batch_size = 16;
    cfg.train.pretrain_epochs = 1;
    cfg.seeds = {0, 1, 2};
    RunReport r = run_all(data, cfg);
    REQUIRE(r.summary.size() == 5);
    double mean = 0;
    for (const auto& s : r.seeds) mean += s.metrics->nmi;
    mean /= 3;
    CHECK(r.find("nmi")->mean == doctest::Approx(mean).epsilon(1e-15));
    CHECK(r.find("avg")->mean <= 1.0);
    CHECK(r.find("std")  == std::nullopt);
    std::string csv = report_csv(r);
    CHECK(csv.rfind("seed,nmi,ari,acc,fmi,avg\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
    CHECK(csv.find("\nmean,") != std::string::npos);
    CHECK(csv.find("\nstd,") != std::string::npos);
    CHECK(report_json(r).find("\"config_hash\"") != std::string::npos);
}

TEST_CASE("pipeline without labels still produces assignments") {
    Dataset data = small_data();
    data.labels.reset();
    RunConfig cfg = desk_defaults();
    cfg.encoder = small_encoder();
    cfg.train.pretrain_epochs = 1;
    cfg.seeds = {0};
    RunReport r = run_all(data, cfg);
    CHECK(r.summary.empty());
    CHECK(r.seeds[0].assignments.size() == data.size());
    CHECK_FALSE(r.seeds[0].metrics.has_value());
}

TEST_CASE("resolve_k") {
    Dataset data = small_data();
    RunConfig cfg = desk_defaults();
    CHECK(resolve_k(data, cfg) == 3);
    cfg.num_clusters = 5;
    CHECK(resolve_k(data, cfg) == 5);
    cfg.num_clusters = 1000;
    CHECK_THROWS_CODE(resolve_k(data, cfg), ErrorCode::TooFewSamples);
    cfg.num_clusters = 0;
    data.num_classes = 0;
    CHECK_THROWS_CODE(resolve_k(data, cfg), ErrorCode::BadK);
}
