#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "vgse/embeddings.hpp"
#include "vgse/types.hpp"

namespace vgse::zsl {

struct SjeConfig {
    double learning_rate = 0.01;
    double margin = 1.0;
    int epochs = 50;
    std::uint64_t seed = 0;
};

// Bilinear compatibility f(x, y) = x^T W phi(y).
struct CompatibilityModel {
    Matrix w;  // D_img x D_v
    double margin = 1.0;
    SjeConfig config;
};

// Image-level features with their class ids, one row per image.
struct LabeledImages {
    Matrix x;
    std::vector<ClassId> labels;
};

CompatibilityModel init_compat(int image_dim, int embed_dim, const SjeConfig& config);

// Structured-hinge training over `classes` (the seen classes). Table rows are
// expected to be L2-normalised already.
CompatibilityModel train_compat(const LabeledImages& train, const embed::ClassEmbeddingTable& table,
                                const std::vector<ClassId>& classes, const SjeConfig& config);

// argmax over candidates; ties go to the lowest class id.
ClassId predict(const CompatibilityModel& model, const Vector& image, const std::vector<ClassId>& candidates,
                const embed::ClassEmbeddingTable& table);

std::vector<ClassId> predict_all(const CompatibilityModel& model, const Matrix& images,
                                 const std::vector<ClassId>& candidates, const embed::ClassEmbeddingTable& table);

// Percent correct per true class.
std::map<ClassId, double> per_class_accuracy(const std::vector<ClassId>& truth, const std::vector<ClassId>& predicted);
double mean_per_class(const std::map<ClassId, double>& per_class);
double harmonic_mean(double u, double s);

struct EvalReport {
    double t1 = 0.0;
    double gzsl_u = 0.0;
    double gzsl_s = 0.0;
    double gzsl_h = 0.0;
    std::map<ClassId, double> zsl_per_class;
    std::map<ClassId, double> gzsl_per_class;
};

// Candidates are the unseen classes.
double eval_zsl(const CompatibilityModel& model, const LabeledImages& test_unseen,
                const embed::ClassEmbeddingTable& table, const std::vector<ClassId>& unseen,
                std::map<ClassId, double>* per_class = nullptr);

struct GzslScores {
    double u = 0.0;
    double s = 0.0;
    double h = 0.0;
};

// Candidates are seen and unseen classes together.
GzslScores eval_gzsl(const CompatibilityModel& model, const LabeledImages& test_seen, const LabeledImages& test_unseen,
                     const embed::ClassEmbeddingTable& table, const std::vector<ClassId>& seen,
                     const std::vector<ClassId>& unseen, std::map<ClassId, double>* per_class = nullptr);

// Image-level features for every image of `split`, in manifest order. Each
// image needs exactly one row (patch_index 0).
LabeledImages images_for_split(const FeatureMatrix& image_features, const DatasetManifest& manifest, Split split);

// L2-normalises the table, trains on the train split and scores both protocols.
EvalReport evaluate(const FeatureMatrix& image_features, const DatasetManifest& manifest,
                    const embed::ClassEmbeddingTable& table, const SjeConfig& config);

// {"t1","u","s","h","per_class":{"zsl":{name:acc},"gzsl":{name:acc}}}
void write_report(const EvalReport& report, const DatasetManifest& manifest, const std::filesystem::path& path);
EvalReport read_report(const std::filesystem::path& path, const DatasetManifest* manifest = nullptr);

}  // namespace vgse::zsl
