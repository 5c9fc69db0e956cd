#include "vgse/stages.hpp"

#include <algorithm>
#include <sstream>

#include "vgse/checksum.hpp"
#include "vgse/embeddings.hpp"
#include "vgse/error.hpp"
#include "vgse/features.hpp"
#include "vgse/manifest.hpp"
#include "vgse/neighbors.hpp"
#include "vgse/patchgen.hpp"

namespace vgse::stages {

namespace fs = std::filesystem;

DatasetManifest open_manifest(const fs::path& manifest, const fs::path& classes) {
    return classes.empty() ? load_manifest(manifest) : load_manifest(manifest, classes);
}

PatchifyResult patchify(const fs::path& images_dir, int n_segments, double compactness, const fs::path& out_dir) {
    if (!fs::is_directory(images_dir)) throw InputError(images_dir.string() + " is not a directory");
    std::vector<std::pair<long long, fs::path>> files;
    for (const auto& entry : fs::directory_iterator(images_dir)) {
        const auto ext = entry.path().extension().string();
        if (ext != ".ppm" && ext != ".pgm" && ext != ".pnm") continue;
        const auto stem = entry.path().stem().string();
        std::size_t used = 0;
        long long id = 0;
        try {
            id = std::stoll(stem, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != stem.size()) throw InputError(entry.path().string() + ": file stem must be an integer image id");
        files.emplace_back(id, entry.path());
    }
    std::sort(files.begin(), files.end());
    fs::create_directories(out_dir);

    PatchifyResult result;
    std::ostringstream boxes;
    for (const auto& [id, path] : files) {
        const auto image = patchgen::read_pnm(path);
        const auto labels = patchgen::compact_watershed(image, n_segments, compactness);
        const auto patches = patchgen::bbox_crop(image, labels);
        for (std::size_t t = 0; t < patches.size(); ++t) {
            const auto& b = patches[t].box;
            patchgen::write_pnm(patches[t].image, out_dir / (std::to_string(id) + "_" + std::to_string(t) + ".ppm"));
            nlohmann::json j;
            j["image_id"] = id;
            j["patch_index"] = t;
            j["box"] = {b.x0, b.y0, b.x1, b.y1};
            boxes << j.dump() << '\n';
        }
        ++result.images;
        result.patches += static_cast<int>(patches.size());
    }
    write_file(out_dir / "boxes.jsonl", boxes.str());
    return result;
}

void select_train(const fs::path& manifest, const fs::path& classes, const fs::path& all_features,
                  const fs::path& out) {
    const auto m = open_manifest(manifest, classes);
    const auto features = load_features(all_features, m);
    save_features(features.filter([&](const RowId& r) { return m.image(r.image_id).split == Split::train; }), out);
}

void neighbors(const fs::path& features, int k, const fs::path& out) {
    knn::save_knn(knn::build_knn(load_features(features), k), out);
}

nlohmann::json train_pc(const fs::path& manifest, const fs::path& classes, const fs::path& train_features,
                        const fs::path& knn_path, const pc::TrainConfig& config, const fs::path& out) {
    const auto m = open_manifest(manifest, classes);
    const auto features = load_features(train_features, m);
    std::vector<int> labels;
    labels.reserve(features.row_ids.size());
    for (const auto& r : features.row_ids) {
        const auto& img = m.image(r.image_id);
        if (img.split != Split::train) {
            throw InputError(train_features.string() + ": image " + std::to_string(r.image_id) +
                             " is not in the train split");
        }
        labels.push_back(m.seen_index(img.class_id));
    }
    const auto index = knn::load_knn(knn_path);
    const auto seen = m.seen_classes();
    const auto result = pc::train_pc(features, labels, m.word_matrix(seen), index, config);
    pc::save_params(result.params, out);
    nlohmann::json summary;
    summary["epoch_loss"] = result.epoch_loss;
    summary["dataset_pel"] = result.dataset_pel;
    summary["warnings"] = result.warnings;
    return summary;
}

void embed(const fs::path& manifest, const fs::path& classes, const fs::path& heads, const fs::path& features,
           bool oracle, const fs::path& out, const fs::path& assignments_csv) {
    const auto m = open_manifest(manifest, classes);
    const auto params = pc::load_params(heads);
    const auto fm = load_features(features, m);
    auto table = embed::seen_table(params, fm, m);
    if (oracle) {
        embed::oracle_unseen_embedding(params, fm, m, embed::OracleMode::enabled, table);
    }
    embed::save_table(table, out);
    if (!assignments_csv.empty()) embed::write_assignments_csv(params, fm, assignments_csv);
}

void relate(const fs::path& manifest, const fs::path& classes, const fs::path& knowledge, const fs::path& seen_table,
            const std::string& mode, const relation::CRConfig& config, const fs::path& out,
            const fs::path& relations_out) {
    auto m = open_manifest(manifest, classes);
    if (!knowledge.empty()) m = with_knowledge(m, load_class_records(knowledge));
    const auto table = embed::load_table(seen_table, static_cast<Eigen::Index>(m.classes().size()));
    for (ClassId c : m.seen_classes()) {
        if (!table.filled(c)) throw InputError(seen_table.string() + ": missing row for seen class " + std::to_string(c));
    }
    if (mode == "oracle") {
        for (ClassId c : m.unseen_classes()) {
            if (table.filled(c) && table.origin[static_cast<std::size_t>(c)] == embed::RowOrigin::oracle) continue;
            throw InputError(seen_table.string() + ": oracle mode needs oracle rows for every unseen class");
        }
        embed::save_table(table, out);
        if (!relations_out.empty()) write_file(relations_out, "");
        return;
    }
    auto cfg = config;
    cfg.mode = relation::parse_mode(mode);
    auto seen_only = table;
    for (ClassId c : m.unseen_classes()) {
        seen_only.origin[static_cast<std::size_t>(c)] = embed::RowOrigin::empty;
        seen_only.rows.row(c).setZero();
    }
    const auto prediction = relation::predict_unseen(seen_only, m, cfg);
    embed::save_table(prediction.table, out);
    if (!relations_out.empty()) relation::write_relations(prediction.relations, relations_out);
}

zsl::EvalReport eval_zsl(const fs::path& manifest, const fs::path& classes, const fs::path& image_features,
                         const fs::path& table_path, bool word_table, const zsl::SjeConfig& config,
                         const fs::path& report_out) {
    const auto m = open_manifest(manifest, classes);
    const auto features = load_features(image_features, m);
    const auto table = word_table ? embed::word_table(m)
                                  : embed::load_table(table_path, static_cast<Eigen::Index>(m.classes().size()));
    const auto report = zsl::evaluate(features, m, table, config);
    if (!report_out.empty()) zsl::write_report(report, m, report_out);
    return report;
}

}  // namespace vgse::stages
