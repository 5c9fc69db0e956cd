#include "vgse/zsl_eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "vgse/checksum.hpp"
#include "vgse/error.hpp"
#include "vgse/rng.hpp"

namespace vgse::zsl {

CompatibilityModel init_compat(int image_dim, int embed_dim, const SjeConfig& config) {
    Rng rng = Rng(config.seed).fork(11);
    CompatibilityModel model;
    model.config = config;
    model.margin = config.margin;
    model.w.resize(image_dim, embed_dim);
    const double scale = 1.0 / std::sqrt(static_cast<double>(std::max(image_dim, 1)));
    for (Eigen::Index i = 0; i < model.w.size(); ++i) model.w.data()[i] = rng.normal(0.0, scale);
    return model;
}

CompatibilityModel train_compat(const LabeledImages& train, const embed::ClassEmbeddingTable& table,
                                const std::vector<ClassId>& classes, const SjeConfig& config) {
    if (train.x.rows() != static_cast<Eigen::Index>(train.labels.size())) {
        throw InputError("train_compat: one label per image required");
    }
    if (classes.empty()) throw InputError("train_compat: no classes");
    const Matrix phi = table.gather(classes);
    std::unordered_map<ClassId, Eigen::Index> slot;
    for (std::size_t i = 0; i < classes.size(); ++i) slot.emplace(classes[i], static_cast<Eigen::Index>(i));
    for (ClassId y : train.labels) {
        if (!slot.count(y)) throw InputError("train_compat: label " + std::to_string(y) + " is not a training class");
    }

    auto model = init_compat(static_cast<int>(train.x.cols()), static_cast<int>(table.dim()), config);
    Rng order_rng = Rng(config.seed).fork(12);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(train.x.rows()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        order_rng.shuffle(order);
        for (Eigen::Index n : order) {
            const auto x = train.x.row(n);
            const Eigen::Index truth = slot.at(train.labels[static_cast<std::size_t>(n)]);
            const Vector scores = phi * (model.w.transpose() * x.transpose());
            Eigen::Index worst = truth;
            double worst_score = scores(truth);
            for (Eigen::Index c = 0; c < scores.size(); ++c) {
                if (c == truth) continue;
                const double v = scores(c) + config.margin;
                if (v > worst_score) {
                    worst_score = v;
                    worst = c;
                }
            }
            if (worst != truth) {
                model.w.noalias() += config.learning_rate * x.transpose() * (phi.row(truth) - phi.row(worst));
            }
        }
    }
    return model;
}

ClassId predict(const CompatibilityModel& model, const Vector& image, const std::vector<ClassId>& candidates,
                const embed::ClassEmbeddingTable& table) {
    if (candidates.empty()) throw InputError("predict: no candidate classes");
    const Vector projected = model.w.transpose() * image;
    ClassId best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (ClassId c : candidates) {
        if (c < 0 || c >= table.size() || !table.filled(c)) {
            throw InputError("class " + std::to_string(c) + " has no embedding row");
        }
        const double s = table.rows.row(c).dot(projected);
        if (s > best_score || (s == best_score && c < best)) {
            best_score = s;
            best = c;
        }
    }
    return best;
}

std::vector<ClassId> predict_all(const CompatibilityModel& model, const Matrix& images,
                                 const std::vector<ClassId>& candidates, const embed::ClassEmbeddingTable& table) {
    std::vector<ClassId> out(static_cast<std::size_t>(images.rows()));
#pragma omp parallel for
    for (Eigen::Index i = 0; i < images.rows(); ++i) {
        out[static_cast<std::size_t>(i)] = predict(model, images.row(i).transpose(), candidates, table);
    }
    return out;
}

std::map<ClassId, double> per_class_accuracy(const std::vector<ClassId>& truth, const std::vector<ClassId>& predicted) {
    if (truth.size() != predicted.size()) throw InputError("per_class_accuracy: size mismatch");
    std::map<ClassId, std::pair<long, long>> counts;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        auto& [hit, total] = counts[truth[i]];
        ++total;
        if (predicted[i] == truth[i]) ++hit;
    }
    std::map<ClassId, double> out;
    for (const auto& [c, ht] : counts) out[c] = 100.0 * static_cast<double>(ht.first) / static_cast<double>(ht.second);
    return out;
}

double mean_per_class(const std::map<ClassId, double>& per_class) {
    if (per_class.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [c, acc] : per_class) sum += acc;
    return sum / static_cast<double>(per_class.size());
}

double harmonic_mean(double u, double s) { return u + s > 0.0 ? 2.0 * u * s / (u + s) : 0.0; }

double eval_zsl(const CompatibilityModel& model, const LabeledImages& test_unseen,
                const embed::ClassEmbeddingTable& table, const std::vector<ClassId>& unseen,
                std::map<ClassId, double>* per_class) {
    const auto acc = per_class_accuracy(test_unseen.labels, predict_all(model, test_unseen.x, unseen, table));
    if (per_class) *per_class = acc;
    return mean_per_class(acc);
}

GzslScores eval_gzsl(const CompatibilityModel& model, const LabeledImages& test_seen, const LabeledImages& test_unseen,
                     const embed::ClassEmbeddingTable& table, const std::vector<ClassId>& seen,
                     const std::vector<ClassId>& unseen, std::map<ClassId, double>* per_class) {
    std::vector<ClassId> all = seen;
    all.insert(all.end(), unseen.begin(), unseen.end());
    std::sort(all.begin(), all.end());
    const auto acc_u = per_class_accuracy(test_unseen.labels, predict_all(model, test_unseen.x, all, table));
    const auto acc_s = per_class_accuracy(test_seen.labels, predict_all(model, test_seen.x, all, table));
    GzslScores out;
    out.u = mean_per_class(acc_u);
    out.s = mean_per_class(acc_s);
    out.h = harmonic_mean(out.u, out.s);
    if (per_class) {
        *per_class = acc_s;
        per_class->insert(acc_u.begin(), acc_u.end());
    }
    return out;
}

LabeledImages images_for_split(const FeatureMatrix& image_features, const DatasetManifest& manifest, Split split) {
    std::unordered_map<ImageId, Eigen::Index> row_of;
    for (Eigen::Index i = 0; i < image_features.rows(); ++i) {
        const auto& id = image_features.row_ids[static_cast<std::size_t>(i)];
        if (!row_of.emplace(id.image_id, i).second) {
            throw InputError("image features: image " + std::to_string(id.image_id) + " has more than one row");
        }
    }
    LabeledImages out;
    std::vector<Eigen::Index> rows;
    for (const auto& img : manifest.images()) {
        if (img.split != split) continue;
        auto it = row_of.find(img.image_id);
        if (it == row_of.end()) {
            throw InputError("image features: no row for " + std::string(to_string(split)) + " image " +
                             std::to_string(img.image_id));
        }
        rows.push_back(it->second);
        out.labels.push_back(img.class_id);
    }
    out.x.resize(static_cast<Eigen::Index>(rows.size()), image_features.dim());
    for (std::size_t r = 0; r < rows.size(); ++r) out.x.row(static_cast<Eigen::Index>(r)) = image_features.values.row(rows[r]).cast<double>();
    return out;
}

EvalReport evaluate(const FeatureMatrix& image_features, const DatasetManifest& manifest,
                    const embed::ClassEmbeddingTable& table, const SjeConfig& config) {
    const auto normalized = embed::l2_normalize(table);
    const auto seen = manifest.seen_classes();
    const auto unseen = manifest.unseen_classes();
    const auto train = images_for_split(image_features, manifest, Split::train);
    const auto test_seen = images_for_split(image_features, manifest, Split::test_seen);
    const auto test_unseen = images_for_split(image_features, manifest, Split::test_unseen);
    if (train.labels.empty()) throw InputError("evaluate: empty train split");
    if (test_unseen.labels.empty()) throw InputError("evaluate: empty test_unseen split");

    const auto model = train_compat(train, normalized, seen, config);
    EvalReport report;
    report.t1 = eval_zsl(model, test_unseen, normalized, unseen, &report.zsl_per_class);
    if (!test_seen.labels.empty()) {
        const auto g = eval_gzsl(model, test_seen, test_unseen, normalized, seen, unseen, &report.gzsl_per_class);
        report.gzsl_u = g.u;
        report.gzsl_s = g.s;
        report.gzsl_h = g.h;
    }
    return report;
}

void write_report(const EvalReport& report, const DatasetManifest& manifest, const std::filesystem::path& path) {
    nlohmann::json j;
    j["t1"] = report.t1;
    j["u"] = report.gzsl_u;
    j["s"] = report.gzsl_s;
    j["h"] = report.gzsl_h;
    nlohmann::json zsl = nlohmann::json::object();
    nlohmann::json gzsl = nlohmann::json::object();
    for (const auto& [c, acc] : report.zsl_per_class) zsl[manifest.class_record(c).name] = acc;
    for (const auto& [c, acc] : report.gzsl_per_class) gzsl[manifest.class_record(c).name] = acc;
    j["per_class"] = {{"zsl", zsl}, {"gzsl", gzsl}};
    write_file(path, j.dump(2) + "\n");
}

EvalReport read_report(const std::filesystem::path& path, const DatasetManifest* manifest) {
    EvalReport r;
    try {
        const auto j = nlohmann::json::parse(read_file(path));
        r.t1 = j.at("t1").get<double>();
        r.gzsl_u = j.at("u").get<double>();
        r.gzsl_s = j.at("s").get<double>();
        r.gzsl_h = j.at("h").get<double>();
        if (manifest != nullptr && j.contains("per_class")) {
            std::unordered_map<std::string, ClassId> by_name;
            for (const auto& c : manifest->classes()) by_name.emplace(c.name, c.class_id);
            const auto zsl = j["per_class"].value("zsl", nlohmann::json::object());
            const auto gzsl = j["per_class"].value("gzsl", nlohmann::json::object());
            for (const auto& [name, acc] : zsl.items()) r.zsl_per_class[by_name.at(name)] = acc.get<double>();
            for (const auto& [name, acc] : gzsl.items()) r.gzsl_per_class[by_name.at(name)] = acc.get<double>();
        }
    } catch (const std::exception& e) {
        throw InputError(path.string() + ": bad report: " + e.what());
    }
    return r;
}

}  // namespace vgse::zsl
