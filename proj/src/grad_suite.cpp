#include "umc/grad_suite.hpp"

#include "umc/contrastive.hpp"
#include "umc/encoder.hpp"

namespace umc {

namespace {

Mat gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

Mat unit_rows(Mat m) {
    m.rowwise().normalize();
    return m;
}

}  // namespace

std::vector<NamedGradCheck> run_grad_suite(double tol, std::uint64_t seed) {
    const FeatureDims dims{6, 5, 4, 5, 4};
    EncoderConfig cfg;
    cfg.d_h = 8;
    cfg.heads = 2;
    cfg.ff_dim = 12;
    cfg.dropout = 0.2;
    UmcModel<double> model(dims, cfg, seed);
    Rng rng(seed, "gradcheck");
    std::vector<NamedGradCheck> out;
    auto check = [&](const std::string& name, DiffOp<double>& op, const Mat& x) {
        out.push_back({name, grad_check(op, x, tol)});
    };

    check("text projection", model.text_proj, gaussian(3, dims.text_dim, rng));

    const SequenceLayout audio_layout{dims.audio_len, {5, 3, 1}};
    model.audio_encoder.set_layout(audio_layout);
    check("audio encoder", model.audio_encoder, gaussian(3 * dims.audio_len, dims.audio_dim, rng));
    const SequenceLayout video_layout{dims.video_len, {2, 4}};
    model.video_encoder.set_layout(video_layout);
    check("video encoder", model.video_encoder, gaussian(2 * dims.video_len, dims.video_dim, rng));

    Mat fusion_in = gaussian(4, 3 * cfg.d_h, rng);
    model.fusion.set_mode(Mode::Train);
    model.fusion.forward(fusion_in);
    model.fusion.dropout().freeze(true);
    check("fusion", model.fusion, fusion_in);
    model.fusion.dropout().freeze(false);

    check("head phi1", model.head_pretrain, gaussian(4, cfg.d_h, rng));
    check("head phi2", model.head_high, gaussian(4, cfg.d_h, rng));
    check("head phi3", model.head_low, gaussian(4, cfg.d_h, rng));

    const std::vector<int> labels{0, 1, 0, 2};
    LossOp<double> ucl([](const Mat& x) { return ucl_loss(make_view_batch<double>(x, 3), 0.2); });
    check("unsupervised contrastive loss", ucl, unit_rows(gaussian(12, 6, rng)));
    LossOp<double> mscl([&labels](const Mat& x) { return mscl_loss(make_view_batch<double>(x, 3, &labels), 1.4); });
    check("supervised contrastive loss", mscl, unit_rows(gaussian(12, 6, rng)));
    return out;
}

}  // namespace umc
