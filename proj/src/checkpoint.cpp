#include "umc/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

namespace umc {

namespace {

constexpr char kMagic[4] = {'U', 'M', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <class U>
void put(std::vector<char>& out, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
public:
    explicit Reader(const std::vector<char>& b) : bytes_(b) {}

    template <class U>
    U get() {
        need(sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += sizeof(U);
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(bytes_.data() + pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > bytes_.size()) throw Error(ErrorCode::BadContainer, "checkpoint truncated");
    }
    const std::vector<char>& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, UmcModel<float>& model, std::uint64_t config_hash) {
    std::vector<char> out(kMagic, kMagic + 4);
    put<std::uint32_t>(out, kVersion);
    put<std::uint64_t>(out, config_hash);
    auto params = model.all_params();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
    for (auto* p : params) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
        out.insert(out.end(), p->name.begin(), p->name.end());
        put<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.rows()));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.cols()));
        for (Eigen::Index i = 0; i < p->value.size(); ++i) {
            std::uint32_t bits;
            std::memcpy(&bits, p->value.data() + i, 4);
            put<std::uint32_t>(out, bits);
        }
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::uint64_t load_checkpoint(const std::filesystem::path& path, UmcModel<float>& model) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::vector<char> bytes{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
    Reader r(bytes);
    if (r.str(4) != std::string(kMagic, 4)) throw Error(ErrorCode::BadContainer, "not a checkpoint file");
    if (r.get<std::uint32_t>() != kVersion) throw Error(ErrorCode::BadContainer, "unsupported checkpoint version");
    const auto hash = r.get<std::uint64_t>();

    std::map<std::string, Param<float>*> by_name;
    for (auto* p : model.all_params()) by_name[p->name] = p;
    const auto count = r.get<std::uint32_t>();
    if (count != by_name.size()) throw Error(ErrorCode::BadContainer, "checkpoint parameter count differs from model");
    // Stage everything first so a bad file leaves the model untouched.
    std::map<std::string, MatF> staged;
    for (std::uint32_t k = 0; k < count; ++k) {
        std::string name = r.str(r.get<std::uint32_t>());
        auto it = by_name.find(name);
        if (it == by_name.end()) throw Error(ErrorCode::BadContainer, "unknown parameter " + name);
        const auto rows = r.get<std::uint32_t>(), cols = r.get<std::uint32_t>();
        if (rows != it->second->value.rows() || cols != it->second->value.cols()) {
            throw Error(ErrorCode::BadContainer, "shape mismatch for " + name);
        }
        MatF m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            std::uint32_t bits = r.get<std::uint32_t>();
            std::memcpy(m.data() + i, &bits, 4);
        }
        staged[name] = std::move(m);
    }
    if (!r.done()) throw Error(ErrorCode::BadContainer, "trailing bytes in checkpoint");
    if (staged.size() != by_name.size()) throw Error(ErrorCode::BadContainer, "duplicate parameter names");
    for (auto& [name, m] : staged) by_name[name]->value = std::move(m);
    return hash;
}

void write_embeddings(const std::filesystem::path& path, const Mat& embeddings) {
    Container c;
    c.modality = Modality::Fused;
    c.seq_len = 1;
    c.dim = static_cast<std::uint32_t>(embeddings.cols());
    c.true_lengths.assign(static_cast<std::size_t>(embeddings.rows()), 1);
    c.values.reserve(static_cast<std::size_t>(embeddings.size()));
    for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
        for (Eigen::Index j = 0; j < embeddings.cols(); ++j) c.values.push_back(static_cast<float>(embeddings(i, j)));
    }
    write_container(path, c);
}

}  // namespace umc
