#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace vgse {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
// Storage-precision matrix. Features live in float32 on disk and in memory;
// every computation promotes rows to double.
using MatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using ClassId = std::int64_t;
using ImageId = std::int64_t;

enum class ClassRole { seen, unseen };
enum class Split { train, test_seen, test_unseen };

const char* to_string(ClassRole role);
const char* to_string(Split split);
ClassRole parse_role(const std::string& text);
Split parse_split(const std::string& text);

struct ClassRecord {
    ClassId class_id = 0;  // position in the class file
    std::string name;
    ClassRole role = ClassRole::seen;
    Vector word_embedding;
};

struct ImageRecord {
    ImageId image_id = 0;
    ClassId class_id = 0;
    Split split = Split::train;
};

class DatasetManifest {
public:
    DatasetManifest() = default;
    // Validates every invariant; throws InputError naming the offending record.
    DatasetManifest(std::vector<ClassRecord> classes, std::vector<ImageRecord> images);

    const std::vector<ClassRecord>& classes() const { return classes_; }
    const std::vector<ImageRecord>& images() const { return images_; }

    const ClassRecord& class_record(ClassId id) const;
    const ImageRecord& image(ImageId id) const;
    bool has_image(ImageId id) const { return image_index_.count(id) != 0; }

    std::vector<ClassId> seen_classes() const;
    std::vector<ClassId> unseen_classes() const;

    // Dense index of a seen class among seen classes, in manifest order.
    // This is the output index of the cluster-to-class layer.
    int seen_index(ClassId id) const;

    int word_dim() const;

    // Word embeddings of the given classes, one row per class.
    Matrix word_matrix(const std::vector<ClassId>& ids) const;

    std::vector<ImageId> images_in_split(Split split) const;

private:
    std::vector<ClassRecord> classes_;
    std::vector<ImageRecord> images_;
    std::unordered_map<ImageId, std::size_t> image_index_;
    std::vector<int> seen_index_;
};

struct RowId {
    ImageId image_id = 0;
    std::int64_t patch_index = 0;
    bool operator==(const RowId&) const = default;
};

struct FeatureMatrix {
    std::vector<RowId> row_ids;
    MatrixF values;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index dim() const { return values.cols(); }
    Vector row(Eigen::Index i) const { return values.row(i).transpose().cast<double>(); }

    // Rows grouped by image id, in first-appearance order.
    std::vector<std::pair<ImageId, std::vector<Eigen::Index>>> rows_by_image() const;
    // Subset of rows whose image satisfies `keep`, preserving order.
    template <typename Pred>
    FeatureMatrix filter(Pred keep) const;
};

template <typename Pred>
FeatureMatrix FeatureMatrix::filter(Pred keep) const {
    std::vector<Eigen::Index> picked;
    for (Eigen::Index i = 0; i < rows(); ++i) {
        if (keep(row_ids[static_cast<std::size_t>(i)])) picked.push_back(i);
    }
    FeatureMatrix out;
    out.values.resize(static_cast<Eigen::Index>(picked.size()), dim());
    out.row_ids.reserve(picked.size());
    for (std::size_t r = 0; r < picked.size(); ++r) {
        out.values.row(static_cast<Eigen::Index>(r)) = values.row(picked[r]);
        out.row_ids.push_back(row_ids[static_cast<std::size_t>(picked[r])]);
    }
    return out;
}

}  // namespace vgse
