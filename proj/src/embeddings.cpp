#include "vgse/embeddings.hpp"

#include <fstream>
#include <iomanip>
#include <string>

#include "vgse/error.hpp"
#include "vgse/features.hpp"

namespace vgse::embed {

const char* to_string(RowOrigin origin) {
    switch (origin) {
        case RowOrigin::empty: return "empty";
        case RowOrigin::aggregated: return "aggregated";
        case RowOrigin::predicted: return "predicted";
        case RowOrigin::oracle: return "oracle";
    }
    return "?";
}

RowOrigin parse_origin(const std::string& text) {
    if (text == "aggregated") return RowOrigin::aggregated;
    if (text == "predicted") return RowOrigin::predicted;
    if (text == "oracle") return RowOrigin::oracle;
    throw InputError("unknown row origin '" + text + "'");
}

void ClassEmbeddingTable::set(ClassId id, const Vector& row, RowOrigin how) {
    if (id < 0 || id >= size()) throw InputError("class id " + std::to_string(id) + " outside the table");
    if (row.size() != dim()) throw InputError("row dim does not match the table");
    rows.row(id) = row.transpose();
    origin[static_cast<std::size_t>(id)] = how;
}

Matrix ClassEmbeddingTable::gather(const std::vector<ClassId>& ids) const {
    Matrix out(static_cast<Eigen::Index>(ids.size()), dim());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= size() || !filled(ids[i])) {
            throw InputError("class " + std::to_string(ids[i]) + " has no embedding row");
        }
        out.row(static_cast<Eigen::Index>(i)) = rows.row(ids[i]);
    }
    return out;
}

pc::ClusterAssignment image_embedding(const pc::ClusterHeadParams& params, const Matrix& patch_features) {
    if (patch_features.rows() == 0) throw InputError("image_embedding: image has no patches");
    return {pc::forward_cluster_rows(params, patch_features).colwise().mean().transpose()};
}

std::unordered_map<ImageId, Vector> image_embeddings(const pc::ClusterHeadParams& params,
                                                     const FeatureMatrix& features) {
    std::unordered_map<ImageId, Vector> out;
    for (const auto& [image, rows] : features.rows_by_image()) {
        Matrix patches(static_cast<Eigen::Index>(rows.size()), features.dim());
        for (std::size_t r = 0; r < rows.size(); ++r) patches.row(static_cast<Eigen::Index>(r)) = features.values.row(rows[r]).cast<double>();
        out.emplace(image, image_embedding(params, patches).probs);
    }
    return out;
}

namespace {

// Mean over the images of `cls` in `split` that have feature rows.
Vector class_mean(const std::unordered_map<ImageId, Vector>& per_image, const DatasetManifest& manifest, ClassId cls,
                  Split split, int dim) {
    Vector sum = Vector::Zero(dim);
    int count = 0;
    for (const auto& img : manifest.images()) {
        if (img.class_id != cls || img.split != split) continue;
        auto it = per_image.find(img.image_id);
        if (it == per_image.end()) continue;
        sum += it->second;
        ++count;
    }
    if (count == 0) {
        throw InputError("class " + std::to_string(cls) + " ('" + manifest.class_record(cls).name + "') has no " +
                         to_string(split) + " images with features");
    }
    return sum / count;
}

}  // namespace

Vector seen_class_embedding(const pc::ClusterHeadParams& params, const FeatureMatrix& features,
                            const DatasetManifest& manifest, ClassId cls) {
    if (manifest.class_record(cls).role != ClassRole::seen) {
        throw InputError("seen_class_embedding: class " + std::to_string(cls) + " is unseen");
    }
    const auto train = features.filter([&](const RowId& r) {
        const auto& img = manifest.image(r.image_id);
        return img.class_id == cls && img.split == Split::train;
    });
    return class_mean(image_embeddings(params, train), manifest, cls, Split::train, params.cluster_count());
}

ClassEmbeddingTable seen_table(const pc::ClusterHeadParams& params, const FeatureMatrix& features,
                               const DatasetManifest& manifest) {
    const auto train = features.filter([&](const RowId& r) { return manifest.image(r.image_id).split == Split::train; });
    const auto per_image = image_embeddings(params, train);
    ClassEmbeddingTable table(static_cast<Eigen::Index>(manifest.classes().size()), params.cluster_count());
    for (ClassId c : manifest.seen_classes()) {
        table.set(c, class_mean(per_image, manifest, c, Split::train, params.cluster_count()), RowOrigin::aggregated);
    }
    return table;
}

void oracle_unseen_embedding(const pc::ClusterHeadParams& params, const FeatureMatrix& features,
                             const DatasetManifest& manifest, OracleMode mode, ClassEmbeddingTable& table) {
    if (mode != OracleMode::enabled) {
        throw UsageError("oracle unseen embeddings use unseen-class images; enable oracle mode explicitly");
    }
    const auto unseen = features.filter(
        [&](const RowId& r) { return manifest.image(r.image_id).split == Split::test_unseen; });
    const auto per_image = image_embeddings(params, unseen);
    for (ClassId c : manifest.unseen_classes()) {
        table.set(c, class_mean(per_image, manifest, c, Split::test_unseen, params.cluster_count()), RowOrigin::oracle);
    }
}

ClassEmbeddingTable l2_normalize(const ClassEmbeddingTable& table) {
    ClassEmbeddingTable out = table;
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        if (!out.filled(i)) continue;
        const double norm = out.rows.row(i).norm();
        if (!(norm > 0.0)) throw InputError("l2_normalize: class " + std::to_string(i) + " has a zero row");
        out.rows.row(i) /= norm;
    }
    return out;
}

void save_table(const ClassEmbeddingTable& table, const std::filesystem::path& path) {
    VgsfContainer c;
    c.dim = static_cast<std::uint32_t>(table.dim());
    for (Eigen::Index i = 0; i < table.size(); ++i) {
        if (!table.filled(i)) continue;
        ++c.n_rows;
        for (Eigen::Index k = 0; k < table.dim(); ++k) c.values.push_back(static_cast<float>(table.rows(i, k)));
        c.trailer.push_back({{"class_id", i}, {"origin", to_string(table.origin[static_cast<std::size_t>(i)])}});
    }
    write_vgsf(c, path);
}

ClassEmbeddingTable load_table(const std::filesystem::path& path, Eigen::Index n_classes) {
    const auto c = read_vgsf(path);
    ClassEmbeddingTable table(n_classes, c.dim);
    for (std::size_t r = 0; r < c.n_rows; ++r) {
        ClassId id = 0;
        RowOrigin origin = RowOrigin::aggregated;
        try {
            id = c.trailer[r].at("class_id").get<ClassId>();
            origin = parse_origin(c.trailer[r].value("origin", std::string("aggregated")));
        } catch (const nlohmann::json::exception& e) {
            throw InputError(path.string() + ": row " + std::to_string(r) + ": " + e.what());
        }
        if (id < 0 || id >= n_classes) {
            throw InputError(path.string() + ": class id " + std::to_string(id) + " outside the manifest");
        }
        if (table.filled(id)) throw InputError(path.string() + ": duplicate row for class " + std::to_string(id));
        Vector row(c.dim);
        for (std::uint32_t k = 0; k < c.dim; ++k) row(k) = c.values[r * c.dim + k];
        if (!row.allFinite()) throw InputError(path.string() + ": non-finite row for class " + std::to_string(id));
        table.set(id, row, origin);
    }
    return table;
}

ClassEmbeddingTable word_table(const DatasetManifest& manifest) {
    ClassEmbeddingTable table(static_cast<Eigen::Index>(manifest.classes().size()), manifest.word_dim());
    for (const auto& c : manifest.classes()) {
        table.set(c.class_id, c.word_embedding,
                  c.role == ClassRole::seen ? RowOrigin::aggregated : RowOrigin::predicted);
    }
    return table;
}

void write_assignments_csv(const pc::ClusterHeadParams& params, const FeatureMatrix& features,
                           const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << "image_id,patch_index";
    for (int k = 0; k < params.cluster_count(); ++k) out << ",a_" << k;
    out << '\n' << std::setprecision(9);
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        const auto a = pc::forward_cluster(params, features.row(i));
        const auto& id = features.row_ids[static_cast<std::size_t>(i)];
        out << id.image_id << ',' << id.patch_index;
        for (Eigen::Index k = 0; k < a.size(); ++k) out << ',' << a.probs(k);
        out << '\n';
    }
}

}  // namespace vgse::embed
