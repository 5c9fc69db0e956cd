#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vgse/class_relation.hpp"
#include "vgse/pc_trainer.hpp"
#include "vgse/zsl_eval.hpp"

namespace vgse::pipeline {

// How unseen rows of the class table are produced.
enum class TableMode { wavg, smo, oracle };

const char* to_string(TableMode mode);
TableMode parse_table_mode(const std::string& text);

struct RunConfig {
    std::filesystem::path manifest;
    std::filesystem::path classes;  // empty: companion of `manifest`
    std::filesystem::path patch_features;
    std::filesystem::path image_features;
    std::filesystem::path images;     // optional; enables the patchify stage
    std::filesystem::path knowledge;  // optional class file replacing word vectors in the relation stage
    std::filesystem::path out_dir = "vgse-run";
    std::filesystem::path cache_dir;  // empty: $VGSE_CACHE_DIR, else <out_dir>/cache

    std::uint64_t seed = 0;
    TableMode mode = TableMode::smo;
    pc::TrainConfig train;
    relation::CRConfig relation;
    zsl::SjeConfig sje;
    int n_segments = 9;
    double compactness = 0.01;

    void validate() const;
    // Seed propagated into the stochastic stages.
    pc::TrainConfig train_config() const;
    zsl::SjeConfig sje_config() const;
};

// Flat "section.key" -> value view of a TOML-style key = value file.
std::map<std::string, std::string> parse_kv(const std::string& text);
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);
RunConfig load_config(const std::filesystem::path& path);
std::string dump_config(const RunConfig& config);

nlohmann::json config_to_json(const RunConfig& config);
RunConfig config_from_json(const nlohmann::json& j);

struct StageRecord {
    std::string name;
    std::string key;                            // content address of the stage
    std::map<std::string, std::string> inputs;  // input name -> sha256
    std::map<std::string, std::string> outputs; // output file -> sha256
    bool skipped = false;
    double seconds = 0.0;
};

struct Metrics {
    double t1 = 0.0;
    double u = 0.0;
    double s = 0.0;
    double h = 0.0;
    bool operator==(const Metrics&) const = default;
};

struct RunRecord {
    nlohmann::json config;
    std::vector<StageRecord> stages;
    Metrics metrics;
    double seconds = 0.0;

    int skipped_stages() const;
};

nlohmann::json record_to_json(const RunRecord& record);
RunRecord record_from_json(const nlohmann::json& j);

std::filesystem::path resolve_cache_dir(const RunConfig& config);

// patchify (when images are given) -> neighbors -> train-pc -> embed ->
// relate -> eval-zsl. Each stage's outputs are stored under the cache at a
// key derived from its input checksums and parameters; a stage whose key
// already exists is skipped. Final artefacts are copied to out_dir together
// with run_record.json.
RunRecord run_pipeline(const RunConfig& config, std::ostream* log = nullptr);

enum class SweepAxis { dv, patches, mode, knowledge };
const char* to_string(SweepAxis axis);
SweepAxis parse_axis(const std::string& text);

struct SweepRow {
    std::string value;
    Metrics metrics;
    int skipped_stages = 0;
    int total_stages = 0;
};

// Applies one value of `axis` to a copy of the base config:
//   dv        -> pc cluster count
//   patches   -> substitutes "{n}" in patch_features
//   mode      -> wavg | smo | oracle
//   knowledge -> path of a class file used by the relation stage
RunConfig sweep_point(const RunConfig& base, SweepAxis axis, const std::string& value);

// One run per value under <out_dir>/<axis>-<value>, sharing one cache.
// Writes sweep.csv and sweep.md into out_dir.
std::vector<SweepRow> sweep(const RunConfig& base, SweepAxis axis, const std::vector<std::string>& values,
                            std::ostream* log = nullptr);

std::string sweep_csv(SweepAxis axis, const std::vector<SweepRow>& rows);
std::string sweep_markdown(SweepAxis axis, const std::vector<SweepRow>& rows);
std::string record_markdown(const RunRecord& record);

}  // namespace vgse::pipeline
