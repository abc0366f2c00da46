#pragma once

#include "umc/numerics.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace umc {

enum class Modality : std::uint8_t { Text = 0, Audio = 1, Video = 2, Fused = 3 };

const char* to_string(Modality m);

struct FeatureDims {
    int text_dim = 0;
    int audio_dim = 0;
    int video_dim = 0;
    int audio_len = 1;
    int video_len = 1;
};

/// One sample's per-modality features. Sequences are padded with zeros to the dataset's
/// declared length; *_len holds the true length.
struct FeatureRecord {
    std::size_t id = 0;
    MatF text;   // 1 x text_dim
    MatF audio;  // audio_len x audio_dim
    MatF video;  // video_len x video_dim
    int audio_len = 0;
    int video_len = 0;
};

/// The label-free view handed to training code.
struct FeatureSet {
    FeatureDims dims;
    std::vector<FeatureRecord> records;

    std::size_t size() const { return records.size(); }
};

struct Dataset {
    FeatureSet features;
    std::optional<std::vector<int>> labels;  // evaluation only
    int num_classes = 0;

    std::size_t size() const { return features.size(); }
};

/// In-memory form of one UMCF container file.
struct Container {
    Modality modality = Modality::Text;
    std::uint32_t seq_len = 1;
    std::uint32_t dim = 0;
    std::vector<std::uint32_t> true_lengths;  // one per sample
    std::vector<float> values;                // count * seq_len * dim, sample-major

    std::size_t count() const { return true_lengths.size(); }
};

std::vector<char> encode_container(const Container& c);
Container decode_container(const std::vector<char>& bytes);
void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path);

/// Flat key=value manifest. Relative paths resolve against the manifest's directory.
struct Manifest {
    std::filesystem::path text, audio, video;
    std::optional<std::filesystem::path> labels;
    int num_classes = 0;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& m);

std::vector<int> read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const std::vector<int>& labels);

struct LoadOptions {
    bool normalize = false;  // per-feature z-scoring over valid positions
};

Dataset load_dataset(const std::filesystem::path& manifest_path, const LoadOptions& opts = {});

Container to_container(const FeatureSet& fs, Modality m);

/// Writes text/audio/video containers, labels (if any) and manifest.txt into `dir`.
/// Returns the manifest path.
std::filesystem::path save_dataset(const std::filesystem::path& dir, const Dataset& ds);

/// Z-scores each feature column of each modality using statistics over valid positions.
void normalize_features(FeatureSet& fs);

struct SynthSpec {
    int num_classes = 4;
    int samples_per_class = 100;
    FeatureDims dims{16, 16, 16, 8, 8};
    double text_separation = 1.0;   // per-coordinate std of class centers
    double audio_separation = 1.0;
    double video_separation = 1.0;
    double noise = 1.0;             // per-coordinate noise std
    double min_length_fraction = 0.5;  // true sequence lengths drawn from [ceil(f*L), L]
    std::vector<std::pair<int, int>> text_ambiguity_pairs;
    std::uint64_t seed = 0;
};

/// Class-center + Gaussian noise features with planted labels. Classes in an ambiguity
/// pair share one text center while keeping distinct audio/video centers.
Dataset generate_synthetic(const SynthSpec& spec);

/// Four classes, pairs (0,1) and (2,3) sharing text centers; audio/video weakly separated.
/// Text alone can resolve only two groups, so multimodal fusion is required to reach K=4.
SynthSpec text_ambiguous_benchmark(std::uint64_t seed = 0);

/// Parses "0:1,2:3" into pairs.
std::vector<std::pair<int, int>> parse_pairs(const std::string& text);

}  // namespace umc
