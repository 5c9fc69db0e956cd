#include <doctest.h>

#include <algorithm>

#include "support.hpp"
#include "synthetic_run.hpp"
#include "vgse/embeddings.hpp"
#include "vgse/error.hpp"
#include "vgse/features.hpp"

using namespace vgse;
using namespace vgse::embed;

namespace {

// Heads that send feature e_k to cluster k (almost exactly).
pc::ClusterHeadParams sharp_heads(int d) {
    pc::ClusterHeadParams p;
    p.w_h = 1000.0 * Matrix::Identity(d, d);
    p.b_h = Vector::Zero(d);
    p.w_q = Matrix::Zero(d, 1);
    p.b_q = Vector::Zero(1);
    p.w_s = Matrix::Zero(d, 1);
    p.b_s = Vector::Zero(1);
    return p;
}

FeatureMatrix rows_for(const std::vector<std::pair<RowId, Vector>>& rows) {
    FeatureMatrix fm;
    fm.values.resize(static_cast<Eigen::Index>(rows.size()), rows.front().second.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        fm.row_ids.push_back(rows[i].first);
        fm.values.row(static_cast<Eigen::Index>(i)) = rows[i].second.cast<float>().transpose();
    }
    return fm;
}

}  // namespace

TEST_CASE("image embedding is the mean patch assignment") {
    const auto p = sharp_heads(2);
    Matrix one(1, 2);
    one << 0.3, -0.1;
    CHECK(image_embedding(p, one).probs.isApprox(pc::forward_cluster(p, one.row(0).transpose()).probs));
    Matrix two(2, 2);
    two << 1, 0, 0, 1;
    const auto e = image_embedding(p, two);
    CHECK(e.probs(0) == doctest::Approx(0.5));
    CHECK(e.probs(1) == doctest::Approx(0.5));
    CHECK_THROWS_AS(image_embedding(p, Matrix(0, 2)), InputError);
}

TEST_CASE("property: aggregation is convex, linear and order-invariant") {
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const auto p = pc::init_params(5, 4, 1, 1, rng);
        const Matrix patches = test::random_matrix(1 + static_cast<Eigen::Index>(rng.index(9)), 5, rng, 2.0);
        const auto e = image_embedding(p, patches);
        CHECK(std::abs(e.probs.sum() - 1.0) <= 1e-12);
        CHECK(e.probs.minCoeff() >= 0.0);
        Vector mean = Vector::Zero(4);
        for (Eigen::Index i = 0; i < patches.rows(); ++i) mean += pc::forward_cluster(p, patches.row(i).transpose()).probs;
        CHECK(e.probs.isApprox(mean / static_cast<double>(patches.rows()), 1e-12));
        const Matrix reversed = patches.colwise().reverse();
        CHECK(image_embedding(p, reversed).probs.isApprox(e.probs, 1e-12));
    }
}

TEST_CASE("seen class embedding averages its training images") {
    Rng rng(2);
    const auto m = test::toy_manifest(2, 1, 3, rng, 2);
    // Images 0,1 train class 0; 2 test_seen class 0; 3,4 train class 1.
    const auto p = sharp_heads(3);
    const auto fm = rows_for({{{0, 0}, test::vec({1, 0, 0})},
                              {{1, 0}, test::vec({0, 1, 0})},
                              {{1, 1}, test::vec({0, 1, 0})},
                              {{2, 0}, test::vec({0, 0, 1})},
                              {{3, 0}, test::vec({0, 0, 1})},
                              {{4, 0}, test::vec({0, 0, 1})}});
    const auto e0 = seen_class_embedding(p, fm, m, 0);
    CHECK(e0(0) == doctest::Approx(0.5));
    CHECK(e0(1) == doctest::Approx(0.5));
    CHECK(e0(2) == doctest::Approx(0.0));
    const auto e1 = seen_class_embedding(p, fm, m, 1);
    CHECK(e1(2) == doctest::Approx(1.0));
    const auto table = seen_table(p, fm, m);
    CHECK(table.filled(0));
    CHECK_FALSE(table.filled(2));
    CHECK(table.origin[1] == RowOrigin::aggregated);
    CHECK(table.rows.row(0).transpose().isApprox(e0));
}

TEST_CASE("seen class without training images is an error") {
    Rng rng(3);
    const auto m = test::toy_manifest(2, 1, 3, rng);
    const auto p = sharp_heads(2);
    const auto fm = rows_for({{{0, 0}, test::vec({1, 0})}});
    CHECK_THROWS_AS(seen_class_embedding(p, fm, m, 1), InputError);
}

TEST_CASE("oracle rows require explicit opt-in") {
    Rng rng(4);
    const auto m = test::toy_manifest(1, 2, 3, rng);
    // Image 0 train class 0, 1 test_seen class 0, 2 and 3 test_unseen.
    const auto p = sharp_heads(2);
    const auto fm = rows_for({{{0, 0}, test::vec({1, 0})}, {{2, 0}, test::vec({0, 1})}, {{3, 0}, test::vec({1, 0})}});
    auto table = seen_table(p, fm, m);
    CHECK_THROWS_AS(oracle_unseen_embedding(p, fm, m, OracleMode::disabled, table), UsageError);
    oracle_unseen_embedding(p, fm, m, OracleMode::enabled, table);
    CHECK(table.origin[1] == RowOrigin::oracle);
    CHECK(table.rows(1, 1) == doctest::Approx(1.0));
    CHECK(table.rows.row(2).sum() == doctest::Approx(1.0));
}

TEST_CASE("l2 normalisation") {
    ClassEmbeddingTable t(3, 4);
    t.set(0, test::vec({3, 4, 0, 0}), RowOrigin::aggregated);
    t.set(1, test::vec({0, 1, 0, 0}), RowOrigin::aggregated);
    t.set(2, test::vec({0.1, 0.5, 0.2, 0.2}), RowOrigin::predicted);
    const auto n = l2_normalize(t);
    CHECK(n.rows(0, 0) == doctest::Approx(0.6));
    CHECK(n.rows(0, 1) == doctest::Approx(0.8));
    CHECK(n.rows.row(1) == t.rows.row(1));
    for (Eigen::Index c = 0; c < 3; ++c) {
        CHECK(std::abs(n.rows.row(c).norm() - 1.0) <= 1e-9);
        Eigen::Index a, b;
        n.rows.row(c).maxCoeff(&a);
        t.rows.row(c).maxCoeff(&b);
        CHECK(a == b);
    }
    t.set(1, Vector::Zero(4), RowOrigin::aggregated);
    CHECK_THROWS_AS(l2_normalize(t), InputError);
}

TEST_CASE("class table file round trip keeps origins and skips empty rows") {
    ClassEmbeddingTable t(4, 3);
    t.set(0, test::vec({0.2, 0.3, 0.5}), RowOrigin::aggregated);
    t.set(3, test::vec({0.1, 0.1, 0.8}), RowOrigin::oracle);
    test::TempDir dir;
    save_table(t, dir / "t.vgsf");
    const auto c = read_vgsf(dir / "t.vgsf");
    CHECK(c.n_rows == 2);
    CHECK(c.trailer[1]["class_id"] == 3);
    CHECK(c.trailer[1]["origin"] == "oracle");
    const auto back = load_table(dir / "t.vgsf", 4);
    CHECK_FALSE(back.filled(1));
    CHECK(back.origin[3] == RowOrigin::oracle);
    CHECK(back.rows.row(3).isApprox(t.rows.row(3), 1e-7));
    CHECK_THROWS_AS(load_table(dir / "t.vgsf", 3), InputError);
}

TEST_CASE("gather requires filled rows") {
    ClassEmbeddingTable t(2, 2);
    t.set(0, test::vec({1, 0}), RowOrigin::aggregated);
    CHECK(t.gather({0}).rows() == 1);
    CHECK_THROWS_AS(t.gather({0, 1}), InputError);
}

TEST_CASE("word table mirrors the manifest") {
    Rng rng(5);
    const auto m = test::toy_manifest(2, 1, 4, rng);
    const auto t = word_table(m);
    CHECK(t.dim() == 4);
    CHECK(t.rows.row(2).transpose() == m.class_record(2).word_embedding);
}

TEST_CASE("oracle unseen rows sit closer to the latent attribute mixtures than predicted rows") {
    const auto run = test::train_synthetic(synth::SyntheticConfig{}, test::synthetic_train_config(12));
    const auto& params = run.trained.params;
    // P(attribute | cluster) from soft assignments of training patches.
    const Matrix a = pc::forward_cluster_rows(params, run.train_rows.values.cast<double>());
    const int n_attr = static_cast<int>(run.data.prototypes.rows());
    Matrix cluster_attr = Matrix::Zero(a.cols(), n_attr);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        cluster_attr.col(run.train_attribute[static_cast<std::size_t>(i)]) += a.row(i).transpose();
    }
    for (Eigen::Index k = 0; k < cluster_attr.rows(); ++k) cluster_attr.row(k) /= cluster_attr.row(k).sum();

    const auto oracle = test::table_for_mode(run, "oracle");
    const auto smo = test::table_for_mode(run, "smo");
    double oracle_err = 0.0;
    double smo_err = 0.0;
    for (ClassId c : run.data.manifest.unseen_classes()) {
        const Vector truth = run.data.signatures.row(c).transpose();
        CHECK(oracle.rows.row(c).sum() == doctest::Approx(1.0).epsilon(1e-6));
        oracle_err += ((oracle.rows.row(c) * cluster_attr).transpose() - truth).norm();
        smo_err += ((smo.rows.row(c) * cluster_attr).transpose() - truth).norm();
    }
    MESSAGE("attribute-space error, oracle " << oracle_err << " vs smo " << smo_err);
    CHECK(oracle_err < smo_err);
}
