#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vgse/types.hpp"

namespace vgse::synth {

// Classes are mixtures over a small set of latent attribute prototypes.
// Every patch is one attribute's prototype plus Gaussian noise; image-level
// features are the class's expected patch mean plus noise; word vectors are
// a fixed linear map of the class's attribute mixture plus noise.
struct SyntheticConfig {
    int seen_classes = 12;
    int unseen_classes = 4;
    int attributes = 6;
    int attributes_per_class = 3;
    int feature_dim = 32;
    int word_dim = 10;
    int patches_per_image = 9;
    int train_images_per_class = 30;
    int test_images_per_class = 10;
    double prototype_scale = 1.0;
    double patch_noise = 0.6;
    double image_noise = 0.35;
    double word_noise = 0.02;
    std::uint64_t seed = 7;
};

struct SyntheticDataset {
    DatasetManifest manifest;
    FeatureMatrix patch_features;  // every image, every patch
    FeatureMatrix image_features;  // one row per image, patch_index 0
    Matrix prototypes;             // attributes x feature_dim
    Matrix signatures;             // classes x attributes, rows sum to 1
    std::vector<int> patch_attribute;  // latent attribute of each patch row
};

SyntheticDataset generate(const SyntheticConfig& config);

// Same dataset with `patches_per_image` overridden, for patch-count sweeps.
SyntheticDataset generate_with_patches(SyntheticConfig config, int patches_per_image);

// Writes <dir>/manifest.jsonl (+ .classes.jsonl), patches.vgsf, images.vgsf.
void write_dataset(const SyntheticDataset& data, const std::filesystem::path& dir);

}  // namespace vgse::synth
