#pragma once

#include "vgse/class_relation.hpp"
#include "vgse/embeddings.hpp"
#include "vgse/neighbors.hpp"
#include "vgse/pc_trainer.hpp"
#include "vgse/synthetic.hpp"
#include "vgse/zsl_eval.hpp"

namespace vgse::test {

// Settings that suit the small synthetic set: larger steps and batches
// than the full-scale defaults.
inline pc::TrainConfig synthetic_train_config(int clusters, std::uint64_t seed = 0) {
    pc::TrainConfig cfg;
    cfg.clusters = clusters;
    cfg.learning_rate = 1e-2;
    cfg.batch_size = 128;
    cfg.neighbor_k = 10;
    cfg.seed = seed;
    return cfg;
}

struct SyntheticRun {
    synth::SyntheticDataset data;
    FeatureMatrix train_rows;
    std::vector<int> train_attribute;  // latent attribute of each training row
    pc::TrainResult trained;
    embed::ClassEmbeddingTable seen;
};

// Training half of the pipeline, in memory.
inline SyntheticRun train_synthetic(const synth::SyntheticConfig& data_cfg, const pc::TrainConfig& cfg) {
    SyntheticRun run;
    run.data = synth::generate(data_cfg);
    const auto& m = run.data.manifest;
    std::vector<int> labels;
    for (Eigen::Index i = 0; i < run.data.patch_features.rows(); ++i) {
        const auto& id = run.data.patch_features.row_ids[static_cast<std::size_t>(i)];
        if (m.image(id.image_id).split != Split::train) continue;
        labels.push_back(m.seen_index(m.image(id.image_id).class_id));
        run.train_attribute.push_back(run.data.patch_attribute[static_cast<std::size_t>(i)]);
    }
    run.train_rows = run.data.patch_features.filter(
        [&](const RowId& r) { return m.image(r.image_id).split == Split::train; });
    const auto index = knn::build_knn(run.train_rows, cfg.neighbor_k);
    run.trained = pc::train_pc(run.train_rows, labels, m.word_matrix(m.seen_classes()), index, cfg);
    run.seen = embed::seen_table(run.trained.params, run.data.patch_features, m);
    return run;
}

inline embed::ClassEmbeddingTable table_for_mode(const SyntheticRun& run, const std::string& mode) {
    if (mode == "oracle") {
        auto table = run.seen;
        embed::oracle_unseen_embedding(run.trained.params, run.data.patch_features, run.data.manifest,
                                       embed::OracleMode::enabled, table);
        return table;
    }
    relation::CRConfig cr;
    cr.mode = relation::parse_mode(mode);
    return relation::predict_unseen(run.seen, run.data.manifest, cr).table;
}

// Every class row drawn at random from the same simplex as real rows.
inline embed::ClassEmbeddingTable random_table(Eigen::Index n_classes, Eigen::Index dim, std::uint64_t seed) {
    Rng rng(seed);
    embed::ClassEmbeddingTable table(n_classes, dim);
    for (Eigen::Index c = 0; c < n_classes; ++c) {
        Vector row(dim);
        for (auto& v : row) v = rng.uniform();
        table.set(c, row / row.sum(), embed::RowOrigin::predicted);
    }
    return table;
}

}  // namespace vgse::test
