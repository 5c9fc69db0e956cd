#include "vgse/types.hpp"

#include <cmath>
#include <string>
#include <unordered_set>

#include "vgse/error.hpp"

namespace vgse {

const char* to_string(ClassRole role) { return role == ClassRole::seen ? "seen" : "unseen"; }

const char* to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::test_seen: return "test_seen";
        case Split::test_unseen: return "test_unseen";
    }
    return "?";
}

ClassRole parse_role(const std::string& text) {
    if (text == "seen") return ClassRole::seen;
    if (text == "unseen") return ClassRole::unseen;
    throw InputError("unknown class role '" + text + "' (expected seen|unseen)");
}

Split parse_split(const std::string& text) {
    if (text == "train") return Split::train;
    if (text == "test_seen") return Split::test_seen;
    if (text == "test_unseen") return Split::test_unseen;
    throw InputError("unknown split '" + text + "' (expected train|test_seen|test_unseen)");
}

DatasetManifest::DatasetManifest(std::vector<ClassRecord> classes, std::vector<ImageRecord> images)
    : classes_(std::move(classes)), images_(std::move(images)) {
    if (classes_.empty()) throw InputError("manifest has no classes");
    const auto dim = classes_.front().word_embedding.size();
    int n_seen = 0;
    std::unordered_set<std::string> names;
    for (std::size_t i = 0; i < classes_.size(); ++i) {
        auto& c = classes_[i];
        const auto where = "class record " + std::to_string(i);
        if (c.class_id != static_cast<ClassId>(i)) {
            throw InputError(where + ": class_id must equal its position");
        }
        if (!names.insert(c.name).second) throw InputError(where + ": duplicate class name '" + c.name + "'");
        if (c.word_embedding.size() == 0) throw InputError(where + ": empty word embedding");
        if (c.word_embedding.size() != dim) {
            throw InputError(where + ": word embedding has dim " + std::to_string(c.word_embedding.size()) +
                             ", expected " + std::to_string(dim));
        }
        if (!c.word_embedding.allFinite()) throw InputError(where + ": non-finite word embedding");
        if (c.word_embedding.squaredNorm() == 0.0) throw InputError(where + ": zero word embedding");
        seen_index_.push_back(c.role == ClassRole::seen ? n_seen++ : -1);
    }
    if (n_seen == 0) throw InputError("manifest has no seen classes");
    if (n_seen == static_cast<int>(classes_.size())) throw InputError("manifest has no unseen classes");

    for (std::size_t i = 0; i < images_.size(); ++i) {
        const auto& img = images_[i];
        const auto where = "image record " + std::to_string(i);
        if (img.class_id < 0 || img.class_id >= static_cast<ClassId>(classes_.size())) {
            throw InputError(where + ": unknown class id " + std::to_string(img.class_id));
        }
        const auto role = classes_[static_cast<std::size_t>(img.class_id)].role;
        if (img.split == Split::train && role != ClassRole::seen) {
            throw InputError(where + ": image " + std::to_string(img.image_id) +
                             " of unseen class is in the train split");
        }
        if (img.split == Split::test_seen && role != ClassRole::seen) {
            throw InputError(where + ": test_seen image belongs to an unseen class");
        }
        if (img.split == Split::test_unseen && role != ClassRole::unseen) {
            throw InputError(where + ": test_unseen image belongs to a seen class");
        }
        if (!image_index_.emplace(img.image_id, i).second) {
            throw InputError(where + ": duplicate image_id " + std::to_string(img.image_id));
        }
    }
}

const ClassRecord& DatasetManifest::class_record(ClassId id) const {
    if (id < 0 || id >= static_cast<ClassId>(classes_.size())) {
        throw InputError("unknown class id " + std::to_string(id));
    }
    return classes_[static_cast<std::size_t>(id)];
}

const ImageRecord& DatasetManifest::image(ImageId id) const {
    auto it = image_index_.find(id);
    if (it == image_index_.end()) throw InputError("unknown image id " + std::to_string(id));
    return images_[it->second];
}

std::vector<ClassId> DatasetManifest::seen_classes() const {
    std::vector<ClassId> out;
    for (const auto& c : classes_)
        if (c.role == ClassRole::seen) out.push_back(c.class_id);
    return out;
}

std::vector<ClassId> DatasetManifest::unseen_classes() const {
    std::vector<ClassId> out;
    for (const auto& c : classes_)
        if (c.role == ClassRole::unseen) out.push_back(c.class_id);
    return out;
}

int DatasetManifest::seen_index(ClassId id) const {
    const int idx = seen_index_.at(static_cast<std::size_t>(class_record(id).class_id));
    if (idx < 0) throw InputError("class " + std::to_string(id) + " is not a seen class");
    return idx;
}

int DatasetManifest::word_dim() const {
    return classes_.empty() ? 0 : static_cast<int>(classes_.front().word_embedding.size());
}

Matrix DatasetManifest::word_matrix(const std::vector<ClassId>& ids) const {
    Matrix out(static_cast<Eigen::Index>(ids.size()), word_dim());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = class_record(ids[i]).word_embedding.transpose();
    }
    return out;
}

std::vector<ImageId> DatasetManifest::images_in_split(Split split) const {
    std::vector<ImageId> out;
    for (const auto& img : images_)
        if (img.split == split) out.push_back(img.image_id);
    return out;
}

std::vector<std::pair<ImageId, std::vector<Eigen::Index>>> FeatureMatrix::rows_by_image() const {
    std::vector<std::pair<ImageId, std::vector<Eigen::Index>>> groups;
    std::unordered_map<ImageId, std::size_t> slot;
    for (Eigen::Index i = 0; i < rows(); ++i) {
        const auto id = row_ids[static_cast<std::size_t>(i)].image_id;
        auto [it, inserted] = slot.emplace(id, groups.size());
        if (inserted) groups.emplace_back(id, std::vector<Eigen::Index>{});
        groups[it->second].second.push_back(i);
    }
    return groups;
}

}  // namespace vgse
