#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "vgse/types.hpp"

namespace vgse {

// On-disk layout shared by feature matrices and class tables:
//   "VGSF" | u8 version=1 | u32le n_rows | u32le dim | n_rows*dim f32le
//   followed by n_rows newline-terminated JSON objects (the row ids).
struct VgsfContainer {
    std::uint32_t n_rows = 0;
    std::uint32_t dim = 0;
    std::vector<float> values;
    std::vector<nlohmann::json> trailer;
};

std::string encode_vgsf(const VgsfContainer& container);
VgsfContainer decode_vgsf(const std::string& bytes);
VgsfContainer read_vgsf(const std::filesystem::path& path);
void write_vgsf(const VgsfContainer& container, const std::filesystem::path& path);

// Structural checks only: finite values, unique row ids.
FeatureMatrix load_features(const std::filesystem::path& path);

// Also checks that every referenced image exists in the manifest and, when
// max_patches > 0, that no image has more than max_patches rows.
FeatureMatrix load_features(const std::filesystem::path& path, const DatasetManifest& manifest,
                            int max_patches = 0);

FeatureMatrix features_from_container(const VgsfContainer& container);
VgsfContainer to_container(const FeatureMatrix& features);
void save_features(const FeatureMatrix& features, const std::filesystem::path& path);

void validate_features(const FeatureMatrix& features, const DatasetManifest& manifest,
                       int max_patches = 0);

}  // namespace vgse
