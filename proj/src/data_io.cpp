#include "umc/data_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

namespace fs = std::filesystem;

namespace umc {

const char* to_string(Modality m) {
    switch (m) {
        case Modality::Text: return "text";
        case Modality::Audio: return "audio";
        case Modality::Video: return "video";
        case Modality::Fused: return "fused";
    }
    return "unknown";
}

namespace {

constexpr char kMagic[4] = {'U', 'M', 'C', 'F'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class Reader {
public:
    explicit Reader(const std::vector<char>& bytes) : bytes_(bytes) {}

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(bytes_[pos_++]);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > bytes_.size()) throw Error(ErrorCode::BadContainer, "truncated container");
    }
    const std::vector<char>& bytes_;
    std::size_t pos_ = 0;
};

std::vector<char> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::vector<char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

fs::path resolve(const fs::path& base_dir, const std::string& value) {
    fs::path p(value);
    return p.is_absolute() ? p : base_dir / p;
}

}  // namespace

std::vector<char> encode_container(const Container& c) {
    const std::size_t stride = static_cast<std::size_t>(c.seq_len) * c.dim;
    if (c.values.size() != c.count() * stride) {
        throw Error(ErrorCode::DimMismatch, "container payload size does not match header");
    }
    std::vector<char> out(kMagic, kMagic + 4);
    out.reserve(24 + c.count() * (4 + stride * 4));
    put_u32(out, kVersion);
    out.push_back(static_cast<char>(c.modality));
    put_u32(out, static_cast<std::uint32_t>(c.count()));
    put_u32(out, c.seq_len);
    put_u32(out, c.dim);
    for (std::size_t s = 0; s < c.count(); ++s) {
        put_u32(out, c.true_lengths[s]);
        for (std::size_t k = 0; k < stride; ++k) put_u32(out, std::bit_cast<std::uint32_t>(c.values[s * stride + k]));
    }
    return out;
}

Container decode_container(const std::vector<char>& bytes) {
    if (bytes.size() < 4 || !std::equal(kMagic, kMagic + 4, bytes.begin())) {
        throw Error(ErrorCode::BadContainer, "bad magic");
    }
    Reader r(bytes);
    for (int i = 0; i < 4; ++i) r.u8();
    if (std::uint32_t version = r.u32(); version != kVersion) {
        throw Error(ErrorCode::BadContainer, "unsupported version " + std::to_string(version));
    }
    Container c;
    std::uint8_t code = r.u8();
    if (code > 3) throw Error(ErrorCode::BadContainer, "unknown modality code " + std::to_string(code));
    c.modality = static_cast<Modality>(code);
    std::uint32_t count = r.u32();
    c.seq_len = r.u32();
    c.dim = r.u32();
    if (c.seq_len == 0) throw Error(ErrorCode::BadContainer, "seq_len must be positive");
    const std::size_t stride = static_cast<std::size_t>(c.seq_len) * c.dim;
    if (bytes.size() != 21 + static_cast<std::size_t>(count) * (4 + 4 * stride)) {
        throw Error(ErrorCode::BadContainer, "payload size does not match header");
    }
    c.true_lengths.resize(count);
    c.values.resize(count * stride);
    for (std::size_t s = 0; s < count; ++s) {
        c.true_lengths[s] = r.u32();
        for (std::size_t k = 0; k < stride; ++k) c.values[s * stride + k] = r.f32();
    }
    return c;
}

void write_container(const fs::path& path, const Container& c) { write_file(path, encode_container(c)); }

Container read_container(const fs::path& path) { return decode_container(read_file(path)); }

Manifest read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open manifest " + path.string());
    const fs::path dir = path.parent_path();
    Manifest m;
    bool has_text = false, has_audio = false, has_video = false, has_k = false;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::BadConfig, "manifest line without '=': " + line);
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key == "text") {
            m.text = resolve(dir, value);
            has_text = true;
        } else if (key == "audio") {
            m.audio = resolve(dir, value);
            has_audio = true;
        } else if (key == "video") {
            m.video = resolve(dir, value);
            has_video = true;
        } else if (key == "labels") {
            m.labels = resolve(dir, value);
        } else if (key == "num_classes") {
            try {
                m.num_classes = std::stoi(value);
            } catch (const std::exception&) {
                throw Error(ErrorCode::BadConfig, "num_classes is not an integer: " + value);
            }
            has_k = true;
        } else {
            throw Error(ErrorCode::BadConfig, "unknown manifest key: " + key);
        }
    }
    if (!has_text || !has_audio || !has_video || !has_k) {
        throw Error(ErrorCode::BadConfig, "manifest needs text=, audio=, video= and num_classes=");
    }
    if (m.num_classes < 1) throw Error(ErrorCode::BadConfig, "num_classes must be positive");
    return m;
}

void write_manifest(const fs::path& path, const Manifest& m) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << "text=" << m.text.generic_string() << "\n";
    out << "audio=" << m.audio.generic_string() << "\n";
    out << "video=" << m.video.generic_string() << "\n";
    if (m.labels) out << "labels=" << m.labels->generic_string() << "\n";
    out << "num_classes=" << m.num_classes << "\n";
}

std::vector<int> read_labels(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open labels " + path.string());
    std::vector<int> labels;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(line, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != line.size()) throw Error(ErrorCode::CorruptData, "bad label line: " + line);
        labels.push_back(v);
    }
    return labels;
}

void write_labels(const fs::path& path, const std::vector<int>& labels) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    for (int l : labels) out << l << "\n";
}

namespace {

void check_container(const Container& c, Modality expected, const fs::path& path) {
    if (c.modality != expected) {
        throw Error(ErrorCode::BadContainer, path.string() + " holds modality " + to_string(c.modality) +
                                                 ", expected " + to_string(expected));
    }
    if (expected == Modality::Text && c.seq_len != 1) {
        throw Error(ErrorCode::BadContainer, "text container must have seq_len 1");
    }
    for (float v : c.values) {
        if (!std::isfinite(v)) throw Error(ErrorCode::CorruptData, path.string() + " contains a non-finite value");
    }
    for (auto len : c.true_lengths) {
        if (len > c.seq_len) throw Error(ErrorCode::CorruptData, path.string() + " true length exceeds seq_len");
    }
}

MatF sample_block(const Container& c, std::size_t s) {
    const std::size_t stride = static_cast<std::size_t>(c.seq_len) * c.dim;
    MatF m = Eigen::Map<const MatF>(c.values.data() + s * stride, c.seq_len, c.dim);
    // Anything past the true length is padding.
    for (std::uint32_t r = c.true_lengths[s]; r < c.seq_len; ++r) m.row(r).setZero();
    return m;
}

}  // namespace

Dataset load_dataset(const fs::path& manifest_path, const LoadOptions& opts) {
    Manifest m = read_manifest(manifest_path);
    Container text = read_container(m.text);
    Container audio = read_container(m.audio);
    Container video = read_container(m.video);
    check_container(text, Modality::Text, m.text);
    check_container(audio, Modality::Audio, m.audio);
    check_container(video, Modality::Video, m.video);
    if (text.count() != audio.count() || text.count() != video.count()) {
        throw Error(ErrorCode::CountMismatch, "sample counts differ: text " + std::to_string(text.count()) +
                                                  ", audio " + std::to_string(audio.count()) + ", video " +
                                                  std::to_string(video.count()));
    }
    const std::size_t n = text.count();
    if (n == 0) throw Error(ErrorCode::CountMismatch, "dataset is empty");

    Dataset ds;
    ds.num_classes = m.num_classes;
    ds.features.dims = {static_cast<int>(text.dim), static_cast<int>(audio.dim), static_cast<int>(video.dim),
                        static_cast<int>(audio.seq_len), static_cast<int>(video.seq_len)};
    ds.features.records.resize(n);
    for (std::size_t s = 0; s < n; ++s) {
        FeatureRecord& r = ds.features.records[s];
        r.id = s;
        r.text = sample_block(text, s);
        r.audio = sample_block(audio, s);
        r.video = sample_block(video, s);
        r.audio_len = static_cast<int>(audio.true_lengths[s]);
        r.video_len = static_cast<int>(video.true_lengths[s]);
    }
    if (n < static_cast<std::size_t>(m.num_classes)) {
        throw Error(ErrorCode::TooFewSamples, "fewer samples than classes");
    }

    if (m.labels) {
        auto labels = read_labels(*m.labels);
        if (labels.size() != n) {
            throw Error(ErrorCode::CountMismatch, "labels file has " + std::to_string(labels.size()) +
                                                      " entries for " + std::to_string(n) + " samples");
        }
        for (int l : labels) {
            if (l < 0 || l >= m.num_classes) {
                throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(l) + " outside [0, " +
                                                            std::to_string(m.num_classes) + ")");
            }
        }
        ds.labels = std::move(labels);
    }
    if (opts.normalize) normalize_features(ds.features);
    return ds;
}

Container to_container(const FeatureSet& fs, Modality m) {
    Container c;
    c.modality = m;
    const auto& d = fs.dims;
    switch (m) {
        case Modality::Text: c.seq_len = 1; c.dim = static_cast<std::uint32_t>(d.text_dim); break;
        case Modality::Audio: c.seq_len = static_cast<std::uint32_t>(d.audio_len); c.dim = static_cast<std::uint32_t>(d.audio_dim); break;
        case Modality::Video: c.seq_len = static_cast<std::uint32_t>(d.video_len); c.dim = static_cast<std::uint32_t>(d.video_dim); break;
        case Modality::Fused: throw Error(ErrorCode::BadContainer, "feature sets have no fused modality");
    }
    c.true_lengths.reserve(fs.size());
    c.values.reserve(fs.size() * c.seq_len * c.dim);
    for (const auto& r : fs.records) {
        const MatF& block = m == Modality::Text ? r.text : (m == Modality::Audio ? r.audio : r.video);
        int len = m == Modality::Text ? 1 : (m == Modality::Audio ? r.audio_len : r.video_len);
        c.true_lengths.push_back(static_cast<std::uint32_t>(len));
        c.values.insert(c.values.end(), block.data(), block.data() + block.size());
    }
    return c;
}

fs::path save_dataset(const fs::path& dir, const Dataset& ds) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
    write_container(dir / "text.umcf", to_container(ds.features, Modality::Text));
    write_container(dir / "audio.umcf", to_container(ds.features, Modality::Audio));
    write_container(dir / "video.umcf", to_container(ds.features, Modality::Video));
    Manifest m{"text.umcf", "audio.umcf", "video.umcf", std::nullopt, ds.num_classes};
    if (ds.labels) {
        write_labels(dir / "labels.txt", *ds.labels);
        m.labels = "labels.txt";
    }
    write_manifest(dir / "manifest.txt", m);
    return dir / "manifest.txt";
}

namespace {

// Z-scores columns of one modality, counting only rows below each record's true length.
template <class Block, class Len>
void zscore(std::vector<FeatureRecord>& records, Block block, Len length) {
    if (records.empty()) return;
    const Eigen::Index dim = block(records[0]).cols();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim), sq = Eigen::VectorXd::Zero(dim);
    double count = 0;
    for (auto& r : records) {
        MatF& m = block(r);
        for (int i = 0; i < length(r); ++i) {
            Eigen::VectorXd row = m.row(i).transpose().template cast<double>();
            sum += row;
            sq += row.cwiseProduct(row);
            count += 1;
        }
    }
    if (count == 0) return;
    Eigen::VectorXd mean = sum / count;
    Eigen::VectorXd std = (sq / count - mean.cwiseProduct(mean)).cwiseMax(0.0).cwiseSqrt();
    for (Eigen::Index j = 0; j < dim; ++j) {
        if (std(j) < 1e-12) std(j) = 1.0;
    }
    for (auto& r : records) {
        MatF& m = block(r);
        for (int i = 0; i < length(r); ++i) {
            for (Eigen::Index j = 0; j < dim; ++j) {
                m(i, j) = static_cast<float>((m(i, j) - mean(j)) / std(j));
            }
        }
    }
}

}  // namespace

void normalize_features(FeatureSet& fs) {
    zscore(fs.records, [](FeatureRecord& r) -> MatF& { return r.text; }, [](const FeatureRecord&) { return 1; });
    zscore(fs.records, [](FeatureRecord& r) -> MatF& { return r.audio; }, [](const FeatureRecord& r) { return r.audio_len; });
    zscore(fs.records, [](FeatureRecord& r) -> MatF& { return r.video; }, [](const FeatureRecord& r) { return r.video_len; });
}

Dataset generate_synthetic(const SynthSpec& spec) {
    if (spec.samples_per_class < 2) throw Error(ErrorCode::SpecTooSmall, "samples_per_class must be at least 2");
    if (spec.num_classes < 1) throw Error(ErrorCode::SpecTooSmall, "num_classes must be positive");
    if (!(spec.text_separation > 0 && spec.audio_separation > 0 && spec.video_separation > 0)) {
        throw Error(ErrorCode::BadConfig, "separations must be positive");
    }
    if (!(spec.noise > 0)) throw Error(ErrorCode::BadConfig, "noise scale must be positive");
    if (!(spec.min_length_fraction > 0 && spec.min_length_fraction <= 1)) {
        throw Error(ErrorCode::BadConfig, "min_length_fraction must be in (0, 1]");
    }
    const auto& d = spec.dims;
    if (d.text_dim < 1 || d.audio_dim < 1 || d.video_dim < 1 || d.audio_len < 1 || d.video_len < 1) {
        throw Error(ErrorCode::BadConfig, "dimensions and sequence lengths must be positive");
    }
    for (auto [a, b] : spec.text_ambiguity_pairs) {
        if (a < 0 || b < 0 || a >= spec.num_classes || b >= spec.num_classes || a == b) {
            throw Error(ErrorCode::BadConfig, "ambiguity pair references an invalid class");
        }
    }

    Rng center_rng(spec.seed, "synth.centers");
    auto centers = [&](int dim, double sep) {
        MatF c(spec.num_classes, dim);
        for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = static_cast<float>(sep * center_rng.normal());
        return c;
    };
    MatF text_c = centers(d.text_dim, spec.text_separation);
    MatF audio_c = centers(d.audio_dim, spec.audio_separation);
    MatF video_c = centers(d.video_dim, spec.video_separation);
    for (auto [a, b] : spec.text_ambiguity_pairs) text_c.row(b) = text_c.row(a);

    Rng noise_rng(spec.seed, "synth.noise");
    auto noisy = [&](const MatF& center_row, int rows) {
        MatF m(rows, center_row.cols());
        for (int r = 0; r < rows; ++r) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                m(r, j) = center_row(0, j) + static_cast<float>(spec.noise * noise_rng.normal());
            }
        }
        return m;
    };
    auto draw_len = [&](int full) {
        int lo = std::max(1, static_cast<int>(std::ceil(spec.min_length_fraction * full)));
        return lo + static_cast<int>(noise_rng.index(static_cast<std::size_t>(full - lo + 1)));
    };

    const std::size_t n = static_cast<std::size_t>(spec.num_classes) * spec.samples_per_class;
    std::vector<int> order_labels;
    order_labels.reserve(n);
    for (int c = 0; c < spec.num_classes; ++c) order_labels.insert(order_labels.end(), spec.samples_per_class, c);
    Rng order_rng(spec.seed, "synth.order");
    order_rng.shuffle(order_labels.begin(), order_labels.end());

    Dataset ds;
    ds.num_classes = spec.num_classes;
    ds.features.dims = d;
    ds.features.records.resize(n);
    for (std::size_t s = 0; s < n; ++s) {
        const int c = order_labels[s];
        FeatureRecord& r = ds.features.records[s];
        r.id = s;
        r.text = noisy(text_c.row(c), 1);
        r.audio_len = draw_len(d.audio_len);
        r.video_len = draw_len(d.video_len);
        r.audio = MatF::Zero(d.audio_len, d.audio_dim);
        r.video = MatF::Zero(d.video_len, d.video_dim);
        r.audio.topRows(r.audio_len) = noisy(audio_c.row(c), r.audio_len);
        r.video.topRows(r.video_len) = noisy(video_c.row(c), r.video_len);
    }
    ds.labels = std::move(order_labels);
    return ds;
}

SynthSpec text_ambiguous_benchmark(std::uint64_t seed) {
    SynthSpec spec;
    spec.num_classes = 4;
    spec.samples_per_class = 100;
    spec.text_separation = 1.0;
    spec.audio_separation = 0.6;
    spec.video_separation = 0.6;
    spec.noise = 1.0;
    spec.text_ambiguity_pairs = {{0, 1}, {2, 3}};
    spec.seed = seed;
    return spec;
}

std::vector<std::pair<int, int>> parse_pairs(const std::string& text) {
    std::vector<std::pair<int, int>> pairs;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        auto colon = item.find(':');
        if (colon == std::string::npos) throw Error(ErrorCode::BadConfig, "pair must look like a:b, got " + item);
        try {
            pairs.emplace_back(std::stoi(item.substr(0, colon)), std::stoi(item.substr(colon + 1)));
        } catch (const std::exception&) {
            throw Error(ErrorCode::BadConfig, "pair must look like a:b, got " + item);
        }
    }
    return pairs;
}

}  // namespace umc
