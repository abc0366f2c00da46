#pragma once

#include "umc/encoder.hpp"
#include "umc/selection.hpp"
#include "umc/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace umc {

/// Everything a run needs. Serialized as flat `section.key=value` lines.
struct RunConfig {
    std::filesystem::path manifest;
    std::filesystem::path output_dir = "umc_out";
    bool normalize = false;
    int num_clusters = 0;  // 0: take K from the manifest
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};

    EncoderConfig encoder;
    TrainConfig train;
    SelectionConfig selection;

    void validate() const;
};

/// Applies one `key=value` assignment. Unknown keys and unparsable values throw BadConfig.
void set_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// Applies "key=value" lines; blank lines and lines starting with '#' are skipped.
void apply_config_text(RunConfig& cfg, const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Canonical form: every key, sorted, doubles printed with round-trip precision.
std::string serialize(const RunConfig& cfg);
std::uint64_t config_hash(const RunConfig& cfg);

/// Desk-scale defaults tuned for the bundled synthetic benchmark.
RunConfig desk_defaults();

}  // namespace umc
