#include "vgse/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "vgse/error.hpp"
#include "vgse/features.hpp"
#include "vgse/manifest.hpp"
#include "vgse/rng.hpp"

namespace vgse::synth {

namespace {

// Distinct sparse mixtures: `per_class` attributes with geometric weights.
Matrix make_signatures(int n_classes, int n_attr, int per_class, Rng& rng) {
    std::vector<double> weights(static_cast<std::size_t>(per_class));
    for (int i = 0; i < per_class; ++i) weights[static_cast<std::size_t>(i)] = per_class - i;
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (auto& w : weights) w /= total;

    Matrix sig = Matrix::Zero(n_classes, n_attr);
    std::set<std::vector<int>> used;
    std::vector<int> attrs(static_cast<std::size_t>(n_attr));
    std::iota(attrs.begin(), attrs.end(), 0);
    for (int c = 0; c < n_classes; ++c) {
        for (int attempt = 0;; ++attempt) {
            if (attempt > 10000) throw InputError("synthetic: cannot draw enough distinct class signatures");
            rng.shuffle(attrs);
            std::vector<int> pick(attrs.begin(), attrs.begin() + per_class);
            if (!used.insert(pick).second) continue;
            for (int i = 0; i < per_class; ++i) sig(c, pick[static_cast<std::size_t>(i)]) = weights[static_cast<std::size_t>(i)];
            break;
        }
    }
    return sig;
}

}  // namespace

SyntheticDataset generate(const SyntheticConfig& cfg) {
    if (cfg.attributes_per_class > cfg.attributes) throw InputError("synthetic: attributes_per_class > attributes");
    Rng root(cfg.seed);
    Rng proto_rng = root.fork(1);
    Rng sig_rng = root.fork(2);
    Rng word_rng = root.fork(3);
    Rng sample_rng = root.fork(4);

    const int n_classes = cfg.seen_classes + cfg.unseen_classes;
    SyntheticDataset out;
    out.prototypes.resize(cfg.attributes, cfg.feature_dim);
    for (Eigen::Index i = 0; i < out.prototypes.size(); ++i) out.prototypes.data()[i] = proto_rng.normal(0.0, cfg.prototype_scale);
    out.signatures = make_signatures(n_classes, cfg.attributes, cfg.attributes_per_class, sig_rng);

    Matrix word_map(cfg.word_dim, cfg.attributes);
    for (Eigen::Index i = 0; i < word_map.size(); ++i) word_map.data()[i] = word_rng.normal();
    std::vector<ClassRecord> classes;
    for (int c = 0; c < n_classes; ++c) {
        ClassRecord rec;
        rec.class_id = c;
        rec.name = "class_" + std::to_string(c);
        rec.role = c < cfg.seen_classes ? ClassRole::seen : ClassRole::unseen;
        rec.word_embedding = word_map * out.signatures.row(c).transpose();
        for (Eigen::Index k = 0; k < rec.word_embedding.size(); ++k) rec.word_embedding(k) += word_rng.normal(0.0, cfg.word_noise);
        classes.push_back(std::move(rec));
    }

    std::vector<ImageRecord> images;
    std::vector<std::vector<float>> patch_rows;
    std::vector<std::vector<float>> image_rows;
    ImageId next_id = 0;
    auto add_images = [&](int c, int count, Split split) {
        const Vector expected = out.prototypes.transpose() * out.signatures.row(c).transpose();
        std::discrete_distribution<int> pick_attr(out.signatures.row(c).data(),
                                                  out.signatures.row(c).data() + cfg.attributes);
        for (int i = 0; i < count; ++i) {
            const ImageId id = next_id++;
            images.push_back({id, c, split});
            for (int t = 0; t < cfg.patches_per_image; ++t) {
                const int a = pick_attr(sample_rng.engine());
                std::vector<float> row(static_cast<std::size_t>(cfg.feature_dim));
                for (int d = 0; d < cfg.feature_dim; ++d) {
                    row[static_cast<std::size_t>(d)] = static_cast<float>(out.prototypes(a, d) + sample_rng.normal(0.0, cfg.patch_noise));
                }
                patch_rows.push_back(std::move(row));
                out.patch_attribute.push_back(a);
                out.patch_features.row_ids.push_back({id, t});
            }
            std::vector<float> img(static_cast<std::size_t>(cfg.feature_dim));
            for (int d = 0; d < cfg.feature_dim; ++d) {
                img[static_cast<std::size_t>(d)] = static_cast<float>(expected(d) + sample_rng.normal(0.0, cfg.image_noise));
            }
            image_rows.push_back(std::move(img));
            out.image_features.row_ids.push_back({id, 0});
        }
    };
    for (int c = 0; c < n_classes; ++c) {
        if (c < cfg.seen_classes) {
            add_images(c, cfg.train_images_per_class, Split::train);
            add_images(c, cfg.test_images_per_class, Split::test_seen);
        } else {
            add_images(c, cfg.test_images_per_class, Split::test_unseen);
        }
    }

    auto to_matrix = [&](const std::vector<std::vector<float>>& rows) {
        MatrixF m(static_cast<Eigen::Index>(rows.size()), cfg.feature_dim);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            m.row(static_cast<Eigen::Index>(r)) = Eigen::Map<const Eigen::RowVectorXf>(rows[r].data(), cfg.feature_dim);
        }
        return m;
    };
    out.patch_features.values = to_matrix(patch_rows);
    out.image_features.values = to_matrix(image_rows);
    out.manifest = DatasetManifest(std::move(classes), std::move(images));
    return out;
}

SyntheticDataset generate_with_patches(SyntheticConfig config, int patches_per_image) {
    config.patches_per_image = patches_per_image;
    return generate(config);
}

void write_dataset(const SyntheticDataset& data, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_manifest(data.manifest, dir / "manifest.jsonl");
    save_features(data.patch_features, dir / "patches.vgsf");
    save_features(data.image_features, dir / "images.vgsf");
}

}  // namespace vgse::synth
