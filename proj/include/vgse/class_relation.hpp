#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vgse/embeddings.hpp"
#include "vgse/types.hpp"

namespace vgse::relation {

enum class Mode { wavg, smo };

const char* to_string(Mode mode);
Mode parse_mode(const std::string& text);

struct CRConfig {
    Mode mode = Mode::smo;
    double eta = 5.0;
    int n_neighbors = 5;
    double alpha = -1.0;
    double tol = 1e-8;
    int max_iter = 50000;
    // Unit-normalise word vectors before measuring relations.
    bool normalize_words = false;

    void validate(int n_seen) const;
};

// Mixing weights of one unseen class over the seen classes.
struct RelationWeights {
    ClassId unseen_class = -1;
    Vector r;
    double residual = 0.0;      // ||w_unseen - r^T W_seen||_2
    double kkt_residual = 0.0;  // norm of the projected-gradient step
    int iterations = 0;
    bool converged = true;
};

// Seen classes as seen by the relation module: ids, word vectors and
// visual embedding rows, all in the same order.
struct SeenClasses {
    std::vector<ClassId> ids;
    Matrix words;
    Matrix rows;
};

double similarity(const Vector& unseen_word, const Vector& seen_word, double eta);

// Indices (into `seen.ids`) of the n nearest seen classes in word space,
// ties broken by lower class id.
std::vector<std::size_t> nearest_seen(const Vector& unseen_word, const SeenClasses& seen, int n);

// (1/n) * sum over the n nearest seen classes of sim * row. The sum is not
// renormalised by the similarity mass.
Vector wavg_predict(const Vector& unseen_word, const SeenClasses& seen, const CRConfig& config);

// Euclidean projection onto {lo <= r_i <= hi, sum r = 1}.
Vector project_capped_simplex(const Vector& v, double lo, double hi = 1.0);

// min ||w - r^T W||_2  s.t.  alpha <= r <= 1, sum r = 1, by accelerated
// projected gradient on the squared objective with step 1/||W||_F^2.
RelationWeights smo_solve(const Matrix& seen_words, const Vector& unseen_word, double alpha, double tol = 1e-8,
                          int max_iter = 50000);

Vector smo_predict(const RelationWeights& weights, const Matrix& seen_rows);

struct Prediction {
    embed::ClassEmbeddingTable table;
    std::vector<RelationWeights> relations;  // unseen classes in id order (SMO only)
};

// Fills every unseen row of `seen_table` (whose seen rows must be filled).
Prediction predict_unseen(const embed::ClassEmbeddingTable& seen_table, const DatasetManifest& manifest,
                          const CRConfig& config);

// One line per unseen class: {"unseen_class":id,"r":[...],"residual":x}.
void write_relations(const std::vector<RelationWeights>& relations, const std::filesystem::path& path);

}  // namespace vgse::relation
