#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vgse/types.hpp"

namespace vgse::knn {

inline constexpr int kDefaultK = 20;

// Exact k-nearest-neighbour table under L2 distance. Row i's neighbours are
// sorted by (distance, row index) and never include i itself.
struct NeighborIndex {
    int k = 0;
    Eigen::Matrix<std::uint32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> neighbor_ids;
    Matrix distances;

    Eigen::Index rows() const { return neighbor_ids.rows(); }
};

NeighborIndex build_knn(const FeatureMatrix& features, int k = kDefaultK);

// "VGSN" | u32le n | u32le k | n*k u32le ids | n*k f32le distances
void save_knn(const NeighborIndex& index, const std::filesystem::path& path);
NeighborIndex load_knn(const std::filesystem::path& path);

}  // namespace vgse::knn
