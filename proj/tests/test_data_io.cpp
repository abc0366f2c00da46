#include "doctest.h"
#include "reference_kmeans.hpp"
#include "test_util.hpp"

#include "umc/data_io.hpp"
#include "umc/metrics.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>

using namespace umc;
using umc::test::slurp;
using umc::test::spit;
using umc::test::TempDir;
namespace fs = std::filesystem;

namespace {

SynthSpec spec_with(int classes, int per_class, std::uint64_t seed) {
    SynthSpec s;
    s.num_classes = classes;
    s.samples_per_class = per_class;
    s.text_separation = 2.0;
    s.audio_separation = 2.0;
    s.video_separation = 2.0;
    s.seed = seed;
    return s;
}

test::Points text_points(const Dataset& ds) {
    test::Points pts;
    for (const auto& r : ds.features.records) {
        std::vector<double> row(r.text.data(), r.text.data() + r.text.size());
        pts.push_back(row);
    }
    return pts;
}

// text plus mean-pooled audio and video over their true lengths.
test::Points concat_points(const Dataset& ds) {
    test::Points pts;
    for (const auto& r : ds.features.records) {
        std::vector<double> row(r.text.data(), r.text.data() + r.text.size());
        for (const auto* seq : {&r.audio, &r.video}) {
            int len = seq == &r.audio ? r.audio_len : r.video_len;
            for (Eigen::Index c = 0; c < seq->cols(); ++c) {
                double s = 0;
                for (int t = 0; t < len; ++t) s += (*seq)(t, c);
                row.push_back(s / len);
            }
        }
        pts.push_back(row);
    }
    return pts;
}

}  // namespace

TEST_CASE("container encode and decode round trip") {
    Container c;
    c.modality = Modality::Audio;
    c.seq_len = 3;
    c.dim = 2;
    c.true_lengths = {3, 1};
    c.values = {1, 2, 3, 4, 5, 6, 7, 8, 0, 0, 0, 0};
    auto bytes = encode_container(c);
    CHECK(bytes.size() == 4 + 4 + 1 + 4 * 3 + 2 * (4 + 6 * 4));
    CHECK(std::string(bytes.data(), 4) == "UMCF");
    auto back = decode_container(bytes);
    CHECK(back.modality == c.modality);
    CHECK(back.seq_len == c.seq_len);
    CHECK(back.dim == c.dim);
    CHECK(back.true_lengths == c.true_lengths);
    CHECK(back.values == c.values);
    CHECK(encode_container(back) == bytes);
}

TEST_CASE("container header errors") {
    Container c;
    c.dim = 2;
    c.true_lengths = {1};
    c.values = {1, 2};
    auto bytes = encode_container(c);
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_CODE(decode_container(bad_magic), ErrorCode::BadContainer);
    auto bad_version = bytes;
    bad_version[4] = 2;
    CHECK_THROWS_CODE(decode_container(bad_version), ErrorCode::BadContainer);
    auto truncated = bytes;
    truncated.pop_back();
    CHECK_THROWS_CODE(decode_container(truncated), ErrorCode::BadContainer);
    auto bad_modality = bytes;
    bad_modality[8] = 9;
    CHECK_THROWS_CODE(decode_container(bad_modality), ErrorCode::BadContainer);
}

TEST_CASE("load_dataset with 445 samples") {
    TempDir dir("load445");
    SynthSpec s = spec_with(5, 89, 3);
    auto ds = generate_synthetic(s);
    REQUIRE(ds.size() == 445);
    auto manifest = save_dataset(dir.path, ds);
    auto loaded = load_dataset(manifest);
    CHECK(loaded.size() == 445);
    CHECK(loaded.num_classes == 5);
    REQUIRE(loaded.labels.has_value());
    CHECK(*loaded.labels == *ds.labels);
    for (std::size_t i = 0; i < 445; i += 37) {
        CHECK(loaded.features.records[i].text == ds.features.records[i].text);
        CHECK(loaded.features.records[i].audio == ds.features.records[i].audio);
        CHECK(loaded.features.records[i].video_len == ds.features.records[i].video_len);
    }
}

TEST_CASE("round trip reproduces container bytes") {
    TempDir dir("roundtrip");
    auto ds = generate_synthetic(spec_with(3, 10, 1));
    auto manifest = save_dataset(dir.path, ds);
    auto loaded = load_dataset(manifest);
    const auto m = read_manifest(manifest);
    CHECK(encode_container(to_container(loaded.features, Modality::Text)) == slurp(m.text));
    CHECK(encode_container(to_container(loaded.features, Modality::Audio)) == slurp(m.audio));
    CHECK(encode_container(to_container(loaded.features, Modality::Video)) == slurp(m.video));
}

TEST_CASE("load_dataset error paths") {
    TempDir dir("errors");
    auto ds = generate_synthetic(spec_with(2, 50, 2));
    auto manifest = save_dataset(dir.path, ds);
    auto m = read_manifest(manifest);

    SUBCASE("count mismatch") {
        auto audio = read_container(m.audio);
        audio.true_lengths.pop_back();
        audio.values.resize(audio.values.size() - audio.seq_len * audio.dim);
        write_container(m.audio, audio);
        CHECK_THROWS_CODE(load_dataset(manifest), ErrorCode::CountMismatch);
    }
    SUBCASE("label equal to K") {
        auto labels = read_labels(*m.labels);
        labels[3] = 2;
        write_labels(*m.labels, labels);
        CHECK_THROWS_CODE(load_dataset(manifest), ErrorCode::LabelOutOfRange);
    }
    SUBCASE("label count mismatch") {
        auto labels = read_labels(*m.labels);
        labels.pop_back();
        write_labels(*m.labels, labels);
        CHECK_THROWS_CODE(load_dataset(manifest), ErrorCode::CountMismatch);
    }
    SUBCASE("non-finite value") {
        auto text = read_container(m.text);
        text.values[5] = std::numeric_limits<float>::quiet_NaN();
        write_container(m.text, text);
        CHECK_THROWS_CODE(load_dataset(manifest), ErrorCode::CorruptData);
    }
    SUBCASE("bad magic on disk") {
        auto bytes = slurp(m.video);
        bytes[1] = 'Z';
        spit(m.video, bytes);
        CHECK_THROWS_CODE(load_dataset(manifest), ErrorCode::BadContainer);
    }
    SUBCASE("modality swapped") {
        fs::copy_file(m.audio, m.video, fs::copy_options::overwrite_existing);
        CHECK_THROWS_CODE(load_dataset(manifest), ErrorCode::BadContainer);
    }
    SUBCASE("true length beyond sequence") {
        auto audio = read_container(m.audio);
        audio.true_lengths[0] = audio.seq_len + 1;
        write_container(m.audio, audio);
        CHECK_THROWS_CODE(load_dataset(manifest), ErrorCode::CorruptData);
    }
    SUBCASE("fewer samples than classes") {
        Manifest copy = m;
        copy.num_classes = 200;
        copy.labels.reset();
        write_manifest(manifest, copy);
        CHECK_THROWS_CODE(load_dataset(manifest), ErrorCode::TooFewSamples);
    }
    SUBCASE("missing file") {
        fs::remove(m.text);
        CHECK_THROWS_CODE(load_dataset(manifest), ErrorCode::IoError);
    }
}

TEST_CASE("padding is zeroed at load") {
    TempDir dir("padding");
    auto ds = generate_synthetic(spec_with(2, 5, 4));
    auto manifest = save_dataset(dir.path, ds);
    auto m = read_manifest(manifest);
    auto audio = read_container(m.audio);
    audio.true_lengths[0] = 2;
    for (std::size_t i = 2 * audio.dim; i < audio.seq_len * audio.dim; ++i) audio.values[i] = 99.0f;
    write_container(m.audio, audio);
    auto loaded = load_dataset(manifest);
    const auto& rec = loaded.features.records[0];
    CHECK(rec.audio_len == 2);
    CHECK(rec.audio.bottomRows(rec.audio.rows() - 2).isZero());
}

TEST_CASE("normalization flag z-scores valid positions") {
    TempDir dir("norm");
    auto ds = generate_synthetic(spec_with(3, 20, 5));
    auto manifest = save_dataset(dir.path, ds);
    auto raw = load_dataset(manifest);
    auto norm = load_dataset(manifest, LoadOptions{true});
    CHECK(raw.features.records[0].text == ds.features.records[0].text);
    for (Eigen::Index c = 0; c < 3; ++c) {
        double mean = 0, sq = 0;
        for (const auto& r : norm.features.records) mean += r.text(0, c);
        mean /= static_cast<double>(norm.size());
        for (const auto& r : norm.features.records) sq += (r.text(0, c) - mean) * (r.text(0, c) - mean);
        CHECK(std::abs(mean) < 1e-5);
        CHECK(std::abs(sq / static_cast<double>(norm.size()) - 1.0) < 1e-3);
    }
    for (const auto& r : norm.features.records) CHECK(r.video.bottomRows(r.video.rows() - r.video_len).isZero());
}

TEST_CASE("manifest and labels files") {
    TempDir dir("manifest");
    std::ofstream(dir.path / "manifest.txt") << "# comment\ntext=t.umcf\naudio = a.umcf\nvideo=v.umcf\nnum_classes=3\n";
    auto m = read_manifest(dir.path / "manifest.txt");
    CHECK(m.text == dir.path / "t.umcf");
    CHECK(m.audio == dir.path / "a.umcf");
    CHECK(!m.labels.has_value());
    CHECK(m.num_classes == 3);
    std::ofstream(dir.path / "bad.txt") << "text=t.umcf\n";
    CHECK_THROWS_CODE(read_manifest(dir.path / "bad.txt"), ErrorCode::BadConfig);

    write_labels(dir.path / "l.txt", {0, 2, 1});
    CHECK(read_labels(dir.path / "l.txt") == std::vector<int>{0, 2, 1});
    std::ofstream(dir.path / "junk.txt") << "0\nx\n";
    CHECK_THROWS_CODE(read_labels(dir.path / "junk.txt"), ErrorCode::CorruptData);
}

TEST_CASE("synthetic generator is deterministic and balanced") {
    auto s = spec_with(4, 30, 9);
    auto a = generate_synthetic(s);
    auto b = generate_synthetic(s);
    REQUIRE(a.size() == 120);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.features.records[i].text == b.features.records[i].text);
        CHECK(a.features.records[i].audio == b.features.records[i].audio);
        CHECK(a.features.records[i].video == b.features.records[i].video);
        CHECK(a.features.records[i].audio_len == b.features.records[i].audio_len);
    }
    CHECK(*a.labels == *b.labels);
    CHECK(encode_container(to_container(a.features, Modality::Video)) ==
          encode_container(to_container(b.features, Modality::Video)));
    std::vector<int> counts(4, 0);
    for (int l : *a.labels) ++counts[static_cast<std::size_t>(l)];
    CHECK(counts == std::vector<int>(4, 30));

    s.seed = 10;
    CHECK(generate_synthetic(s).features.records[0].text != a.features.records[0].text);
}

TEST_CASE("synthetic generator rejects bad settings") {
    auto s = spec_with(4, 1, 0);
    CHECK_THROWS_CODE(generate_synthetic(s), ErrorCode::SpecTooSmall);
    s = spec_with(4, 10, 0);
    s.noise = 0;
    CHECK_THROWS_CODE(generate_synthetic(s), ErrorCode::BadConfig);
    s = spec_with(4, 10, 0);
    s.text_separation = 0;
    CHECK_THROWS_CODE(generate_synthetic(s), ErrorCode::BadConfig);
    s = spec_with(4, 10, 0);
    s.text_ambiguity_pairs = {{0, 4}};
    CHECK_THROWS_CODE(generate_synthetic(s), ErrorCode::BadConfig);
}

TEST_CASE("parse_pairs") {
    CHECK(parse_pairs("0:1,2:3") == std::vector<std::pair<int, int>>{{0, 1}, {2, 3}});
    CHECK(parse_pairs("").empty());
    CHECK_THROWS_CODE(parse_pairs("0-1"), ErrorCode::BadConfig);
}

TEST_CASE("planted structure: text alone separates classes") {
    auto ds = generate_synthetic(spec_with(4, 200, 0));
    CHECK(ds.size() == 800);
    auto pred = test::reference_kmeans(text_points(ds), 4, 1);
    CHECK(nmi(*ds.labels, pred) > 0.95);
}

TEST_CASE("planted structure: ambiguous text needs the other modalities") {
    auto s = spec_with(4, 200, 0);
    s.text_ambiguity_pairs = {{0, 1}, {2, 3}};
    auto ds = generate_synthetic(s);
    auto text_only = test::reference_kmeans(text_points(ds), 4, 1);
    auto full = test::reference_kmeans(concat_points(ds), 4, 1);
    CHECK(nmi(*ds.labels, text_only) <= 0.7);
    CHECK(nmi(*ds.labels, full) > 0.9);
}
