#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "vgse/class_relation.hpp"
#include "vgse/pc_trainer.hpp"
#include "vgse/zsl_eval.hpp"

// File-to-file steps shared by the CLI subcommands and the pipeline driver.
namespace vgse::stages {

struct PatchifyResult {
    int images = 0;
    int patches = 0;
};

// Segments every .ppm/.pgm in `images_dir` (file stem = integer image id)
// and writes <out>/<image_id>_<t>.ppm crops plus <out>/boxes.jsonl.
PatchifyResult patchify(const std::filesystem::path& images_dir, int n_segments, double compactness,
                        const std::filesystem::path& out_dir);

// Rows of `all_features` belonging to training-split images.
void select_train(const std::filesystem::path& manifest, const std::filesystem::path& classes,
                  const std::filesystem::path& all_features, const std::filesystem::path& out);

void neighbors(const std::filesystem::path& features, int k, const std::filesystem::path& out);

// Returns the training summary (per-epoch loss, warnings) as JSON.
nlohmann::json train_pc(const std::filesystem::path& manifest, const std::filesystem::path& classes,
                        const std::filesystem::path& train_features, const std::filesystem::path& knn,
                        const pc::TrainConfig& config, const std::filesystem::path& out);

void embed(const std::filesystem::path& manifest, const std::filesystem::path& classes,
           const std::filesystem::path& heads, const std::filesystem::path& features, bool oracle,
           const std::filesystem::path& out, const std::filesystem::path& assignments_csv = {});

// mode "oracle" passes a table that already carries oracle rows through.
void relate(const std::filesystem::path& manifest, const std::filesystem::path& classes,
            const std::filesystem::path& knowledge, const std::filesystem::path& seen_table,
            const std::string& mode, const relation::CRConfig& config, const std::filesystem::path& out,
            const std::filesystem::path& relations_out);

zsl::EvalReport eval_zsl(const std::filesystem::path& manifest, const std::filesystem::path& classes,
                         const std::filesystem::path& image_features, const std::filesystem::path& table,
                         bool word_table, const zsl::SjeConfig& config, const std::filesystem::path& report_out);

DatasetManifest open_manifest(const std::filesystem::path& manifest, const std::filesystem::path& classes);

}  // namespace vgse::stages
