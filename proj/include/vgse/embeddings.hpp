#pragma once

#include <filesystem>
#include <unordered_map>
#include <vector>

#include "vgse/pc_trainer.hpp"
#include "vgse/types.hpp"

namespace vgse::embed {

enum class RowOrigin { empty, aggregated, predicted, oracle };

const char* to_string(RowOrigin origin);
RowOrigin parse_origin(const std::string& text);

// One row per class id; rows not yet filled have origin `empty`.
struct ClassEmbeddingTable {
    Matrix rows;
    std::vector<RowOrigin> origin;

    ClassEmbeddingTable() = default;
    ClassEmbeddingTable(Eigen::Index n_classes, Eigen::Index dim)
        : rows(Matrix::Zero(n_classes, dim)), origin(static_cast<std::size_t>(n_classes), RowOrigin::empty) {}

    Eigen::Index size() const { return rows.rows(); }
    Eigen::Index dim() const { return rows.cols(); }
    bool filled(ClassId id) const { return origin.at(static_cast<std::size_t>(id)) != RowOrigin::empty; }
    void set(ClassId id, const Vector& row, RowOrigin how);
    // Rows of the given classes stacked in order; every row must be filled.
    Matrix gather(const std::vector<ClassId>& ids) const;
};

enum class OracleMode { disabled, enabled };

pc::ClusterAssignment image_embedding(const pc::ClusterHeadParams& params, const Matrix& patch_features);

// Mean patch assignment per image, keyed by image id.
std::unordered_map<ImageId, Vector> image_embeddings(const pc::ClusterHeadParams& params,
                                                     const FeatureMatrix& features);

// Mean image embedding over the class's training images.
Vector seen_class_embedding(const pc::ClusterHeadParams& params, const FeatureMatrix& features,
                            const DatasetManifest& manifest, ClassId cls);

// Table with every seen class aggregated from its training images.
ClassEmbeddingTable seen_table(const pc::ClusterHeadParams& params, const FeatureMatrix& features,
                               const DatasetManifest& manifest);

// Fills unseen rows from unseen-class images. This leaks test images into
// the class table and exists only as a diagnostic upper bound, so it must be
// requested explicitly.
void oracle_unseen_embedding(const pc::ClusterHeadParams& params, const FeatureMatrix& features,
                             const DatasetManifest& manifest, OracleMode mode, ClassEmbeddingTable& table);

ClassEmbeddingTable l2_normalize(const ClassEmbeddingTable& table);

// Table rows stored in the feature container; each filled row's id line is
// {"class_id":c,"origin":"..."}. Empty rows are omitted.
void save_table(const ClassEmbeddingTable& table, const std::filesystem::path& path);
ClassEmbeddingTable load_table(const std::filesystem::path& path, Eigen::Index n_classes);

// Word embeddings as a class table (the baseline semantic space).
ClassEmbeddingTable word_table(const DatasetManifest& manifest);

// Per-patch assignments as CSV: image_id,patch_index,a_0,...
void write_assignments_csv(const pc::ClusterHeadParams& params, const FeatureMatrix& features,
                           const std::filesystem::path& path);

}  // namespace vgse::embed
