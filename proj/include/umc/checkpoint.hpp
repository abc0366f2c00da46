#pragma once

#include "umc/encoder.hpp"

#include <cstdint>
#include <filesystem>

namespace umc {

/// Binary dump of every named parameter: "UMCK", u32 version, u64 config hash, u32 count,
/// then per parameter u32 name length, name, u32 rows, u32 cols, float32 values.
void save_checkpoint(const std::filesystem::path& path, UmcModel<float>& model, std::uint64_t config_hash);

/// Loads parameters into a model of matching architecture and returns the stored config hash.
/// Missing or extra names, shape mismatches and header problems throw BadContainer.
std::uint64_t load_checkpoint(const std::filesystem::path& path, UmcModel<float>& model);

/// Writes one embedding row per sample as a fused-modality UMCF container.
void write_embeddings(const std::filesystem::path& path, const Mat& embeddings);

}  // namespace umc
