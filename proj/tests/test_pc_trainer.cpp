#include <doctest.h>

#include <cmath>
#include <numeric>

#include "gradcheck.hpp"
#include "support.hpp"
#include "vgse/error.hpp"
#include "vgse/neighbors.hpp"
#include "vgse/pc_trainer.hpp"

using namespace vgse;
using namespace vgse::pc;

namespace {

ClusterHeadParams zero_params(int d_f, int d_v, int n_seen, int d_w) {
    ClusterHeadParams p;
    p.w_h = Matrix::Zero(d_f, d_v);
    p.b_h = Vector::Zero(d_v);
    p.w_q = Matrix::Zero(d_v, n_seen);
    p.b_q = Vector::Zero(n_seen);
    p.w_s = Matrix::Zero(d_v, d_w);
    p.b_s = Vector::Zero(d_w);
    return p;
}

ClusterAssignment one_hot(int size, int at) {
    Vector v = Vector::Zero(size);
    v(at) = 1.0;
    return {v};
}

FeatureMatrix as_features(const Matrix& m) {
    FeatureMatrix fm;
    fm.values = m.cast<float>();
    for (Eigen::Index i = 0; i < m.rows(); ++i) fm.row_ids.push_back({i, 0});
    return fm;
}

// Two Gaussian blobs at +/-3 along every axis.
Matrix two_blobs(int per_blob, int dim, Rng& rng, std::vector<int>& truth) {
    Matrix x(2 * per_blob, dim);
    for (int i = 0; i < 2 * per_blob; ++i) {
        const double centre = i < per_blob ? -3.0 : 3.0;
        for (int d = 0; d < dim; ++d) x(i, d) = centre + rng.normal(0.0, 0.5);
        truth.push_back(i < per_blob ? 0 : 1);
    }
    return x;
}

}  // namespace

TEST_CASE("zero heads give a uniform assignment") {
    const auto p = zero_params(4, 5, 2, 3);
    const auto a = forward_cluster(p, Vector::Ones(4));
    for (Eigen::Index k = 0; k < 5; ++k) CHECK(a.probs(k) == doctest::Approx(0.2));
}

TEST_CASE("large bias saturates the assignment without overflow") {
    auto p = zero_params(3, 4, 2, 2);
    p.b_h(0) = 1e4;
    const auto a = forward_cluster(p, Vector::Ones(3));
    CHECK(a.probs(0) == 1.0);
    CHECK(a.probs.tail(3).sum() < 1e-300);
}

TEST_CASE("property: assignments are probability vectors") {
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        const auto p = init_params(6, 5, 2, 2, rng);
        Vector x(6);
        for (auto& v : x) v = rng.normal(0.0, 10.0);
        const auto a = forward_cluster(p, x);
        CHECK(std::abs(a.probs.sum() - 1.0) <= 1e-12);
        CHECK(a.probs.minCoeff() >= 0.0);
    }
}

TEST_CASE("feature dimension mismatch is an error") {
    const auto p = zero_params(4, 3, 2, 2);
    CHECK_THROWS_AS(forward_cluster(p, Vector::Ones(5)), InputError);
}

TEST_CASE("clustering loss examples") {
    CHECK(loss_clu(one_hot(3, 1), one_hot(3, 1)) == doctest::Approx(0.0));
    CHECK(loss_clu(one_hot(3, 0), one_hot(3, 2)) == doctest::Approx(18.420680744));
    const ClusterAssignment u{Vector::Constant(4, 0.25)};
    CHECK(loss_clu(u, u) == doctest::Approx(1.386294361));
}

TEST_CASE("entropy penalty examples") {
    std::vector<ClusterAssignment> uniform;
    for (int k = 0; k < 8; ++k) uniform.push_back(one_hot(8, k));
    CHECK(loss_pel(uniform) == doctest::Approx(-2.079441542));
    std::vector<ClusterAssignment> collapsed = {one_hot(4, 2), one_hot(4, 2)};
    CHECK(loss_pel(collapsed) == doctest::Approx(0.0));
    std::vector<ClusterAssignment> half = {one_hot(4, 0), one_hot(4, 1)};
    CHECK(loss_pel(half) == doctest::Approx(-0.693147181));
    CHECK_THROWS_AS(loss_pel(std::vector<ClusterAssignment>{}), InputError);
}

TEST_CASE("property: entropy penalty lies in [-log D_v, 0] and clustering loss is non-negative") {
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        const int d_v = 2 + static_cast<int>(rng.index(20));
        std::vector<ClusterAssignment> batch;
        for (std::size_t i = 0; i < 1 + rng.index(10); ++i) {
            Vector z(d_v);
            for (auto& v : z) v = rng.normal(0.0, 4.0);
            batch.push_back({softmax(z)});
        }
        const double pel = loss_pel(batch);
        CHECK(pel >= -std::log(static_cast<double>(d_v)) - 1e-12);
        CHECK(pel <= 1e-12);
        CHECK(loss_clu(batch.front(), batch.back()) >= 0.0);
    }
}

TEST_CASE("class loss examples") {
    CHECK(loss_cls_logits(test::vec({0, 0}), 0) == doctest::Approx(std::log(2.0)));
    CHECK(loss_cls_logits(test::vec({1, 0}), 0) == doctest::Approx(0.3132616875));
    CHECK(loss_cls_logits(test::vec({800, 0}), 0) == doctest::Approx(0.0));
    CHECK_THROWS_AS(loss_cls_logits(test::vec({0, 0}), 2), InputError);
}

TEST_CASE("semantic loss examples") {
    auto p = zero_params(2, 2, 1, 2);
    const ClusterAssignment a{test::vec({0.5, 0.5})};
    CHECK(loss_sem(p, a, test::vec({0.6, 0.8})) == doctest::Approx(1.0));
    p.b_s = test::vec({3, 4});
    CHECK(loss_sem(p, a, test::vec({0, 0})) == doctest::Approx(5.0));
    p.w_s << 2, 0, 0, 2;
    p.b_s.setZero();
    CHECK(loss_sem(p, a, test::vec({1, 1})) == doctest::Approx(0.0));
}

TEST_CASE("objective with zero weights equals the mean clustering loss") {
    Rng rng(3);
    auto g = test::random_grad_problem(17);
    g.batch.words = &g.words;
    const auto out = total_loss(g.params, g.batch, LossWeights{1, 0, 0, 0});
    double expected = 0.0;
    for (Eigen::Index i = 0; i < g.batch.anchors.rows(); ++i) {
        expected += loss_clu(forward_cluster(g.params, g.batch.anchors.row(i).transpose()),
                             forward_cluster(g.params, g.batch.neighbors.row(i).transpose()));
    }
    CHECK(out.total == doctest::Approx(expected / static_cast<double>(g.batch.anchors.rows())));
}

TEST_CASE("objective on a hand-computed two-sample batch") {
    // W_H = 0 makes every assignment (1/2, 1/2):
    //   clu = -log(1/2) = log 2, pel = -log 2.
    // Q logits = a W_Q = (1, 0): labels 0 and 1 give log(1+e^-1) and log(1+e).
    // S(a) = b_S = (3, 0): words (0,-4) and (3,0) give residual norms 5 and 0.
    // total = log 2 - 5 log 2 + (0.31326 + 1.31326)/2 + 2.5
    auto p = zero_params(2, 2, 2, 2);
    p.w_q << 2, 0, 0, 0;
    p.b_s = test::vec({3, 0});
    Matrix words(2, 2);
    words << 0, -4, 3, 0;
    Batch b;
    b.anchors = Matrix::Ones(2, 2);
    b.neighbors = Matrix::Zero(2, 2);
    b.labels = {0, 1};
    b.words = &words;
    const auto out = total_loss(p, b, LossWeights{1, 5, 1, 1});
    const double cls = 0.5 * (std::log1p(std::exp(-1.0)) + std::log1p(std::exp(1.0)));
    CHECK(out.clu == doctest::Approx(std::log(2.0)));
    CHECK(out.pel == doctest::Approx(-std::log(2.0)));
    CHECK(out.cls == doctest::Approx(cls));
    CHECK(out.sem == doctest::Approx(2.5));
    CHECK(out.total == doctest::Approx(-4.0 * std::log(2.0) + cls + 2.5));
    CHECK(out.total == doctest::Approx(0.540684));
}

TEST_CASE("gradients match central finite differences on 20 random draws") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto g = test::random_grad_problem(seed);
        for (const auto& term : test::loss_terms()) {
            CAPTURE(seed);
            CAPTURE(term.name);
            CHECK(test::gradient_relative_error(g, term.weights) < 1e-4);
        }
    }
}

TEST_CASE("loss_and_gradient reports the same value as total_loss") {
    auto g = test::random_grad_problem(99);
    g.batch.words = &g.words;
    ClusterHeadParams grad;
    const LossWeights w{1, 5, 1, 1};
    CHECK(loss_and_gradient(g.params, g.batch, w, grad).total == total_loss(g.params, g.batch, w).total);
}

TEST_CASE("property: permuting cluster indices leaves the objective unchanged") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto g = test::random_grad_problem(100 + seed);
        g.batch.words = &g.words;
        Rng rng(seed);
        const int d_v = g.params.cluster_count();
        std::vector<int> perm(static_cast<std::size_t>(d_v));
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);
        auto q = g.params;
        for (int k = 0; k < d_v; ++k) {
            const int src = perm[static_cast<std::size_t>(k)];
            q.w_h.col(k) = g.params.w_h.col(src);
            q.b_h(k) = g.params.b_h(src);
            q.w_q.row(k) = g.params.w_q.row(src);
            q.w_s.row(k) = g.params.w_s.row(src);
        }
        const LossWeights w{1, 5, 1, 1};
        CHECK(total_loss(q, g.batch, w).total == doctest::Approx(total_loss(g.params, g.batch, w).total).epsilon(1e-12));
    }
}

TEST_CASE("flatten and unflatten are inverse") {
    Rng rng(4);
    const auto p = init_params(5, 4, 3, 2, rng);
    auto q = ClusterHeadParams::zeros_like(p);
    unflatten(flatten(p), q);
    CHECK(q.w_h == p.w_h);
    CHECK(q.b_s == p.b_s);
    CHECK(flatten(p).size() == 5 * 4 + 4 + 4 * 3 + 3 + 4 * 2 + 2);
}

TEST_CASE("initialisation bounds") {
    Rng rng(5);
    const auto p = init_params(16, 8, 3, 2, rng);
    CHECK(p.w_h.cwiseAbs().maxCoeff() <= 0.25);
    CHECK(p.w_q.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(8.0));
    CHECK(p.b_h.isZero());
    CHECK(p.b_q.isZero());
    CHECK(p.b_s.isZero());
}

TEST_CASE("training with zero epochs returns the initialisation") {
    Rng rng(6);
    const auto fm = as_features(test::random_matrix(30, 4, rng));
    const auto knn = knn::build_knn(fm, 3);
    const std::vector<int> labels(30, 0);
    const Matrix words = Matrix::Ones(1, 2);
    TrainConfig cfg;
    cfg.clusters = 3;
    cfg.epochs = 0;
    cfg.seed = 11;
    const auto result = train_pc(fm, labels, words, knn, cfg);
    Rng init = Rng(11).fork(1);
    auto expected = init_params(4, 3, 1, 2, init);
    CHECK(result.params.w_h == expected.w_h);
    CHECK(result.params.w_q == expected.w_q);
    CHECK(result.params.w_s == expected.w_s);
    CHECK(result.epoch_loss.empty());
}

TEST_CASE("invalid training inputs") {
    Rng rng(7);
    const auto fm = as_features(test::random_matrix(10, 3, rng));
    const auto knn = knn::build_knn(fm, 2);
    const Matrix words = Matrix::Ones(2, 2);
    TrainConfig cfg;
    cfg.clusters = 4;
    CHECK_THROWS_AS(train_pc(fm, std::vector<int>(9, 0), words, knn, cfg), InputError);
    CHECK_THROWS_AS(train_pc(FeatureMatrix{}, {}, words, knn, cfg), InputError);
    cfg.clusters = 1;
    CHECK_THROWS_AS(cfg.validate(), InputError);
    cfg.clusters = 4;
    cfg.lambda = -1;
    CHECK_THROWS_AS(cfg.validate(), InputError);
    cfg.lambda = 5;
    cfg.clusters = 20;
    cfg.epochs = 1;
    const auto result = train_pc(fm, std::vector<int>(10, 1), words, knn, cfg);
    REQUIRE(result.warnings.size() == 1);
    CHECK(result.warnings[0].find("exceeds") != std::string::npos);
}

TEST_CASE("two separated blobs are recovered with high purity") {
    Rng rng(8);
    std::vector<int> truth;
    const auto fm = as_features(two_blobs(100, 8, rng, truth));
    const auto knn = knn::build_knn(fm, 10);
    TrainConfig cfg;
    cfg.clusters = 2;
    cfg.lambda = 5;
    cfg.beta = 0;
    cfg.gamma = 0;
    cfg.learning_rate = 1e-2;
    cfg.batch_size = 32;
    cfg.epochs = 30;
    cfg.seed = 3;
    const auto result = train_pc(fm, std::vector<int>(200, 0), Matrix::Ones(1, 2), knn, cfg);
    const Matrix a = forward_cluster_rows(result.params, fm.values.cast<double>());
    int agree = 0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        Eigen::Index k;
        a.row(i).maxCoeff(&k);
        agree += static_cast<int>(k) == truth[static_cast<std::size_t>(i)] ? 1 : 0;
    }
    const double purity = std::max(agree, 200 - agree) / 200.0;
    CHECK(purity >= 0.95);
}

TEST_CASE("epoch loss trends down and training is bit-reproducible") {
    Rng rng(9);
    std::vector<int> truth;
    const auto fm = as_features(two_blobs(150, 6, rng, truth));
    const auto knn = knn::build_knn(fm, 10);
    Matrix words(2, 3);
    words << 1, 0, 0, 0, 1, 0;
    TrainConfig cfg;
    cfg.clusters = 6;
    cfg.learning_rate = 5e-3;
    cfg.batch_size = 32;
    cfg.epochs = 20;
    cfg.seed = 4;
    const auto a = train_pc(fm, truth, words, knn, cfg);
    // Three-epoch moving average may rise by at most 5% of its magnitude.
    std::vector<double> avg;
    for (std::size_t e = 2; e < a.epoch_loss.size(); ++e) {
        avg.push_back((a.epoch_loss[e] + a.epoch_loss[e - 1] + a.epoch_loss[e - 2]) / 3.0);
    }
    for (std::size_t e = 1; e < avg.size(); ++e) CHECK(avg[e] <= avg[e - 1] + 0.05 * std::abs(avg[e - 1]));
    CHECK(a.epoch_loss.back() < a.epoch_loss.front());

    const auto b = train_pc(fm, truth, words, knn, cfg);
    CHECK(a.params == b.params);
    CHECK(a.epoch_loss == b.epoch_loss);
    cfg.seed = 5;
    CHECK_FALSE(train_pc(fm, truth, words, knn, cfg).params == a.params);
}

TEST_CASE("heads file round trip") {
    Rng rng(10);
    auto p = init_params(7, 5, 3, 4, rng);
    p.b_h(2) = 0.125;
    p.lambda = 5;
    p.beta = 1;
    p.gamma = 0.5;
    test::TempDir dir;
    save_params(p, dir / "heads.vgsp");
    const auto bytes = read_file(dir / "heads.vgsp");
    CHECK(bytes.substr(0, 4) == "VGSP");
    CHECK(bytes.size() == 4 + 1 + 16 + 24 + 8 * static_cast<std::size_t>(flatten(p).size()));
    const auto q = load_params(dir / "heads.vgsp");
    CHECK(q == p);
    CHECK(q.gamma == 0.5);
    write_file(dir / "bad.vgsp", "VGSQ" + bytes.substr(4));
    CHECK_THROWS_AS(load_params(dir / "bad.vgsp"), InputError);
    write_file(dir / "short.vgsp", bytes.substr(0, bytes.size() - 8));
    CHECK_THROWS_AS(load_params(dir / "short.vgsp"), InputError);
}
