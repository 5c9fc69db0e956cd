#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vgse/neighbors.hpp"
#include "vgse/rng.hpp"
#include "vgse/types.hpp"

namespace vgse::pc {

inline constexpr double kLogEps = 1e-8;

// Three linear heads. H maps a patch feature to cluster scores, Q maps a
// cluster assignment to seen-class logits, S maps it into word space.
struct ClusterHeadParams {
    Matrix w_h;  // D_f x D_v
    Vector b_h;
    Matrix w_q;  // D_v x |Y^s|
    Vector b_q;
    Matrix w_s;  // D_v x D_w
    Vector b_s;
    // Loss weights the heads were trained with; carried for provenance.
    double lambda = 0.0;
    double beta = 0.0;
    double gamma = 0.0;

    int feature_dim() const { return static_cast<int>(w_h.rows()); }
    int cluster_count() const { return static_cast<int>(w_h.cols()); }
    int seen_count() const { return static_cast<int>(w_q.cols()); }
    int word_dim() const { return static_cast<int>(w_s.cols()); }

    static ClusterHeadParams zeros_like(const ClusterHeadParams& shape);
    bool operator==(const ClusterHeadParams& other) const;
};

struct ClusterAssignment {
    Vector probs;
    Eigen::Index size() const { return probs.size(); }
};

struct TrainConfig {
    int clusters = 150;
    double lambda = 5.0;
    double beta = 1.0;
    double gamma = 1.0;
    double learning_rate = 1e-4;
    int batch_size = 256;
    int epochs = 30;
    std::uint64_t seed = 0;
    int neighbor_k = knn::kDefaultK;

    void validate() const;
};

// Weights of each objective term. The clustering term is 1 in training;
// tests isolate single terms by zeroing the others.
struct LossWeights {
    double clu = 1.0;
    double pel = 0.0;
    double cls = 0.0;
    double sem = 0.0;

    static LossWeights from(const TrainConfig& config) { return {1.0, config.lambda, config.beta, config.gamma}; }
};

struct LossBreakdown {
    double clu = 0.0;
    double pel = 0.0;
    double cls = 0.0;
    double sem = 0.0;
    double total = 0.0;
};

// Anchors with one sampled neighbour each. Labels index seen classes;
// `words` holds one word-embedding row per seen class.
struct Batch {
    Matrix anchors;
    Matrix neighbors;
    std::vector<int> labels;
    const Matrix* words = nullptr;
};

ClusterHeadParams init_params(int feature_dim, int clusters, int seen_count, int word_dim, Rng& rng);

Vector softmax(const Vector& logits);

ClusterAssignment forward_cluster(const ClusterHeadParams& params, const Vector& feature);
// Row-wise assignments for a block of features.
Matrix forward_cluster_rows(const ClusterHeadParams& params, const Matrix& features);

double loss_clu(const ClusterAssignment& anchor, const ClusterAssignment& neighbor);
double loss_pel(std::span<const ClusterAssignment> batch);
// Entropy penalty of a precomputed mean assignment.
double mean_entropy_penalty(const Vector& mean_assignment);
double loss_cls_logits(const Vector& logits, int label);
double loss_cls(const ClusterHeadParams& params, const ClusterAssignment& assignment, int label);
double loss_sem(const ClusterHeadParams& params, const ClusterAssignment& assignment, const Vector& word);

LossBreakdown total_loss(const ClusterHeadParams& params, const Batch& batch, const LossWeights& weights);

// Same value as total_loss; writes d(total)/d(params) into `grad`.
LossBreakdown loss_and_gradient(const ClusterHeadParams& params, const Batch& batch, const LossWeights& weights,
                                ClusterHeadParams& grad);

Vector flatten(const ClusterHeadParams& params);
void unflatten(const Vector& flat, ClusterHeadParams& params);

struct TrainResult {
    ClusterHeadParams params;
    std::vector<double> epoch_loss;  // mean batch objective per epoch
    double dataset_pel = 0.0;        // entropy penalty of the full-data mean assignment
    std::vector<std::string> warnings;
};

// `features` must hold training-split patches only; `labels[i]` is the
// seen-class index of row i; `knn` was built on exactly these rows.
TrainResult train_pc(const FeatureMatrix& features, const std::vector<int>& labels, const Matrix& seen_words,
                     const knn::NeighborIndex& knn, const TrainConfig& config);

// "VGSP" | u8 version=1 | u32le D_f, D_v, |Y^s|, D_w | f64le lambda, beta,
// gamma | f64le W_H, b_H, W_Q, b_Q, W_S, b_S (matrices row-major)
void save_params(const ClusterHeadParams& params, const std::filesystem::path& path);
ClusterHeadParams load_params(const std::filesystem::path& path);

}  // namespace vgse::pc
