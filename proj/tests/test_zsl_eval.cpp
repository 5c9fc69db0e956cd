#include <doctest.h>

#include <json.hpp>

#include "support.hpp"
#include "synthetic_run.hpp"
#include "vgse/error.hpp"
#include "vgse/zsl_eval.hpp"

using namespace vgse;
using namespace vgse::zsl;

namespace {

embed::ClassEmbeddingTable table_from(const Matrix& rows) {
    embed::ClassEmbeddingTable t(rows.rows(), rows.cols());
    for (Eigen::Index c = 0; c < rows.rows(); ++c) t.set(c, rows.row(c).transpose(), embed::RowOrigin::aggregated);
    return t;
}

// Two classes separated along the first axis.
LabeledImages separable(int per_class, Rng& rng) {
    LabeledImages d;
    d.x.resize(2 * per_class, 3);
    for (int i = 0; i < 2 * per_class; ++i) {
        const double sign = i < per_class ? 1.0 : -1.0;
        d.x.row(i) << sign * (1.0 + rng.uniform()), rng.normal(), rng.normal();
        d.labels.push_back(i < per_class ? 0 : 1);
    }
    return d;
}

}  // namespace

TEST_CASE("harmonic mean closed forms") {
    CHECK(harmonic_mean(40, 60) == doctest::Approx(48.0));
    CHECK(harmonic_mean(0, 75) == 0.0);
    CHECK(harmonic_mean(0, 0) == 0.0);
    CHECK(harmonic_mean(37.5, 37.5) == doctest::Approx(37.5));
}

TEST_CASE("property: harmonic mean lies between u and s") {
    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        const double u = rng.uniform(0, 100);
        const double s = rng.uniform(0, 100);
        const double h = harmonic_mean(u, s);
        CHECK(h >= std::min(u, s) - 1e-12);
        CHECK(h <= std::max(u, s) + 1e-12);
    }
}

TEST_CASE("per-class accuracy on a three-class fixture") {
    const std::vector<ClassId> truth = {0, 0, 0, 1, 1, 2};
    const std::vector<ClassId> pred = {0, 0, 1, 1, 0, 1};
    const auto acc = per_class_accuracy(truth, pred);
    CHECK(acc.at(0) == doctest::Approx(200.0 / 3.0));
    CHECK(acc.at(1) == doctest::Approx(50.0));
    CHECK(acc.at(2) == doctest::Approx(0.0));
    CHECK(mean_per_class(acc) == doctest::Approx((200.0 / 3.0 + 50.0) / 3.0));
}

TEST_CASE("per-class mean ignores class sizes") {
    std::vector<ClassId> truth(99, 0);
    truth.push_back(1);
    std::vector<ClassId> pred(99, 0);
    pred.push_back(0);
    CHECK(mean_per_class(per_class_accuracy(truth, pred)) == doctest::Approx(50.0));
    CHECK(mean_per_class(per_class_accuracy(truth, truth)) == doctest::Approx(100.0));
}

TEST_CASE("ties go to the lowest class id") {
    CompatibilityModel m;
    m.w = Matrix::Zero(2, 2);
    const auto t = table_from(Matrix::Identity(4, 2).eval().topRows(2).replicate(2, 1));
    CHECK(predict(m, test::vec({1, 1}), {3, 2, 1}, t) == 1);
    CHECK_THROWS_AS(predict(m, test::vec({1, 1}), {}, t), InputError);
    embed::ClassEmbeddingTable partial(3, 2);
    partial.set(0, test::vec({1, 0}), embed::RowOrigin::aggregated);
    CHECK_THROWS_AS(predict(m, test::vec({1, 1}), {0, 2}, partial), InputError);
}

TEST_CASE("separable two-class problem is fit perfectly") {
    Rng rng(2);
    const auto train = separable(40, rng);
    Matrix phi(2, 2);
    phi << 1, 0, 0, 1;
    const auto table = table_from(phi);
    SjeConfig cfg;
    cfg.epochs = 30;
    const auto model = train_compat(train, table, {0, 1}, cfg);
    const auto pred = predict_all(model, train.x, {0, 1}, table);
    CHECK(mean_per_class(per_class_accuracy(train.labels, pred)) == 100.0);
}

TEST_CASE("zero epochs leaves the initialisation") {
    Rng rng(3);
    const auto train = separable(5, rng);
    SjeConfig cfg;
    cfg.epochs = 0;
    cfg.seed = 9;
    const auto model = train_compat(train, table_from(Matrix::Identity(2, 2)), {0, 1}, cfg);
    CHECK(model.w == init_compat(3, 2, cfg).w);
    CHECK(init_compat(3, 2, cfg).w != init_compat(3, 2, SjeConfig{}).w);
}

TEST_CASE("identical class rows give chance-level accuracy without failing") {
    Rng rng(4);
    const auto train = separable(10, rng);
    const auto table = table_from(Matrix::Constant(2, 3, 0.5));
    const auto model = train_compat(train, table, {0, 1}, SjeConfig{});
    const auto acc = per_class_accuracy(train.labels, predict_all(model, train.x, {0, 1}, table));
    CHECK(mean_per_class(acc) == doctest::Approx(50.0));
}

TEST_CASE("labels outside the training classes are rejected") {
    Rng rng(5);
    auto train = separable(3, rng);
    train.labels[0] = 5;
    CHECK_THROWS_AS(train_compat(train, table_from(Matrix::Identity(2, 2)), {0, 1}, SjeConfig{}), InputError);
}

TEST_CASE("property: positive scaling of the table leaves predictions unchanged") {
    Rng rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        CompatibilityModel m;
        m.w = test::random_matrix(5, 4, rng);
        const Matrix rows = test::random_matrix(6, 4, rng);
        const Matrix x = test::random_matrix(30, 5, rng);
        const double scale = rng.uniform(0.01, 100.0);
        const std::vector<ClassId> cands = {0, 1, 2, 3, 4, 5};
        CHECK(predict_all(m, x, cands, table_from(rows)) == predict_all(m, x, cands, table_from(scale * rows)));
    }
}

TEST_CASE("property: metrics do not depend on test image order") {
    Rng rng(7);
    CompatibilityModel m;
    m.w = test::random_matrix(4, 3, rng);
    const auto table = table_from(test::random_matrix(4, 3, rng));
    LabeledImages test;
    test.x = test::random_matrix(40, 4, rng);
    for (int i = 0; i < 40; ++i) test.labels.push_back(2 + i % 2);
    const double t1 = eval_zsl(m, test, table, {2, 3});
    LabeledImages reversed;
    reversed.x = test.x.colwise().reverse();
    reversed.labels.assign(test.labels.rbegin(), test.labels.rend());
    CHECK(eval_zsl(m, reversed, table, {3, 2}) == doctest::Approx(t1));
}

TEST_CASE("end-to-end evaluation on a toy manifest and report round trip") {
    Rng rng(8);
    const auto m = test::toy_manifest(3, 2, 4, rng, 10);
    FeatureMatrix feats;
    feats.values.resize(static_cast<Eigen::Index>(m.images().size()), 5);
    const Matrix centers = test::random_matrix(5, 5, rng, 3.0);
    for (std::size_t i = 0; i < m.images().size(); ++i) {
        const auto& img = m.images()[i];
        feats.row_ids.push_back({img.image_id, 0});
        feats.values.row(static_cast<Eigen::Index>(i)) =
            (centers.row(img.class_id) + 0.1 * test::random_matrix(1, 5, rng)).cast<float>();
    }
    // Table = class centres: a perfectly aligned embedding.
    const auto report = evaluate(feats, m, table_from(centers), SjeConfig{});
    CHECK(report.t1 >= 0.0);
    CHECK(report.t1 <= 100.0);
    CHECK(report.gzsl_h == doctest::Approx(harmonic_mean(report.gzsl_u, report.gzsl_s)));
    CHECK(report.zsl_per_class.size() == 2);
    CHECK(report.gzsl_per_class.size() == 5);

    test::TempDir dir;
    write_report(report, m, dir / "report.json");
    const auto j = nlohmann::json::parse(read_file(dir / "report.json"));
    for (const char* key : {"t1", "u", "s", "h"}) CHECK(j.contains(key));
    CHECK(j["per_class"]["zsl"].contains("class3"));
    const auto back = read_report(dir / "report.json", &m);
    CHECK(back.t1 == doctest::Approx(report.t1));
    CHECK(back.zsl_per_class == report.zsl_per_class);

    FeatureMatrix doubled = feats;
    doubled.row_ids[1] = doubled.row_ids[0];
    CHECK_THROWS_AS(images_for_split(doubled, m, Split::train), InputError);
}

TEST_CASE("oracle class table beats a random table by at least 30 points") {
    const auto run = test::train_synthetic(synth::SyntheticConfig{}, test::synthetic_train_config(12));
    const auto& m = run.data.manifest;
    const auto oracle = evaluate(run.data.image_features, m, test::table_for_mode(run, "oracle"), SjeConfig{});
    const auto random = evaluate(run.data.image_features, m,
                                 test::random_table(static_cast<Eigen::Index>(m.classes().size()), 12, 99),
                                 SjeConfig{});
    MESSAGE("oracle T1 " << oracle.t1 << ", random T1 " << random.t1);
    CHECK(oracle.t1 >= random.t1 + 30.0);
}
