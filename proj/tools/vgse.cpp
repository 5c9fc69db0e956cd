#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vgse/checksum.hpp"
#include "vgse/error.hpp"
#include "vgse/pipeline.hpp"
#include "vgse/stages.hpp"
#include "vgse/synthetic.hpp"

namespace fs = std::filesystem;
using namespace vgse;

namespace {

std::vector<std::string> split_values(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

pipeline::RunConfig config_with_overrides(const fs::path& config_path, const std::vector<std::string>& sets) {
    pipeline::RunConfig c = config_path.empty() ? pipeline::RunConfig{} : pipeline::load_config(config_path);
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
        pipeline::apply_setting(c, s.substr(0, eq), s.substr(eq + 1));
    }
    return c;
}

void print_report(const fs::path& path) {
    const auto j = nlohmann::json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) throw InputError("report: " + path.string() + " is not valid JSON");
    if (j.contains("stages")) {
        std::cout << pipeline::record_markdown(pipeline::record_from_json(j));
        return;
    }
    const auto r = zsl::read_report(path);
    std::cout << "| T1 | u | s | H |\n|---|---|---|---|\n";
    std::cout << std::fixed;
    std::cout.precision(1);
    std::cout << "| " << r.t1 << " | " << r.gzsl_u << " | " << r.gzsl_s << " | " << r.gzsl_h << " |\n";
    if (!r.zsl_per_class.empty()) {
        std::cout << "\n| class | ZSL acc | GZSL acc |\n|---|---|---|\n";
        for (const auto& [name, acc] : r.zsl_per_class) {
            auto g = r.gzsl_per_class.find(name);
            std::cout << "| " << name << " | " << acc << " | "
                      << (g == r.gzsl_per_class.end() ? 0.0 : g->second) << " |\n";
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Visually grounded class embeddings for zero-shot learning"};
    app.require_subcommand(1);

    // patchify
    auto* patchify = app.add_subcommand("patchify", "Segment images into compact-watershed patches");
    fs::path images_dir, patch_out;
    int n_segments = 9;
    double compactness = 0.01;
    patchify->add_option("--images", images_dir, "Directory of .ppm/.pgm images named <image_id>.ppm")->required();
    patchify->add_option("--n-segments", n_segments);
    patchify->add_option("--compactness", compactness);
    patchify->add_option("--out", patch_out)->required();

    // neighbors
    auto* neighbors = app.add_subcommand("neighbors", "Exact k nearest neighbours of feature rows");
    fs::path nb_features, nb_out;
    int nb_k = 20;
    neighbors->add_option("--features", nb_features)->required();
    neighbors->add_option("--k", nb_k);
    neighbors->add_option("--out", nb_out)->required();

    // train-pc
    auto* train = app.add_subcommand("train-pc", "Train the patch clustering heads");
    fs::path tr_features, tr_knn, tr_manifest, tr_classes, tr_out, tr_log;
    pc::TrainConfig tc;
    train->add_option("--features", tr_features, "Training-split patch features")->required();
    train->add_option("--knn", tr_knn)->required();
    train->add_option("--manifest", tr_manifest)->required();
    train->add_option("--classes", tr_classes);
    train->add_option("--dv", tc.clusters);
    train->add_option("--lambda", tc.lambda);
    train->add_option("--beta", tc.beta);
    train->add_option("--gamma", tc.gamma);
    train->add_option("--lr", tc.learning_rate);
    train->add_option("--batch-size", tc.batch_size);
    train->add_option("--epochs", tc.epochs);
    train->add_option("--seed", tc.seed);
    train->add_option("--out", tr_out)->required();
    train->add_option("--log", tr_log, "Write the training summary JSON here");

    // embed
    auto* embed = app.add_subcommand("embed", "Aggregate cluster assignments into class embeddings");
    fs::path em_heads, em_features, em_manifest, em_classes, em_out, em_assign;
    bool em_oracle = false;
    embed->add_option("--heads", em_heads)->required();
    embed->add_option("--features", em_features)->required();
    embed->add_option("--manifest", em_manifest)->required();
    embed->add_option("--classes", em_classes);
    embed->add_flag("--oracle", em_oracle, "Also build unseen rows from test images (diagnostic only)");
    embed->add_option("--assignments", em_assign, "Write per-patch cluster probabilities as CSV");
    embed->add_option("--out", em_out)->required();

    // relate
    auto* relate = app.add_subcommand("relate", "Predict unseen class embeddings from seen ones");
    fs::path rl_seen, rl_manifest, rl_classes, rl_knowledge, rl_out, rl_relations;
    std::string rl_mode = "smo";
    relation::CRConfig rc;
    relate->add_option("--mode", rl_mode)->check(CLI::IsMember({"smo", "wavg", "oracle"}));
    relate->add_option("--seen", rl_seen)->required();
    relate->add_option("--manifest", rl_manifest)->required();
    relate->add_option("--classes", rl_classes);
    relate->add_option("--knowledge", rl_knowledge, "Class file whose word vectors replace the manifest's");
    relate->add_option("--alpha", rc.alpha);
    relate->add_option("--eta", rc.eta);
    relate->add_option("--neighbors", rc.n_neighbors);
    relate->add_option("--tol", rc.tol);
    relate->add_option("--max-iter", rc.max_iter);
    relate->add_flag("--normalize-words", rc.normalize_words);
    relate->add_option("--out", rl_out)->required();
    relate->add_option("--relations", rl_relations, "Default: <out stem>.relations.jsonl");

    // eval-zsl
    auto* eval = app.add_subcommand("eval-zsl", "Train SJE on seen classes and report ZSL/GZSL accuracy");
    fs::path ev_features, ev_manifest, ev_classes, ev_table, ev_report;
    bool ev_words = false;
    zsl::SjeConfig sc;
    eval->add_option("--image-features", ev_features)->required();
    eval->add_option("--manifest", ev_manifest)->required();
    eval->add_option("--classes", ev_classes);
    auto* table_opt = eval->add_option("--table", ev_table);
    auto* words_opt = eval->add_flag("--word-table", ev_words, "Use the manifest word vectors as the class table");
    table_opt->excludes(words_opt);
    eval->add_option("--epochs", sc.epochs);
    eval->add_option("--lr", sc.learning_rate);
    eval->add_option("--margin", sc.margin);
    eval->add_option("--seed", sc.seed);
    eval->add_option("--report", ev_report)->required();

    // run
    auto* run = app.add_subcommand("run", "Run the full pipeline with stage caching");
    fs::path run_config, run_replay, run_out;
    std::vector<std::string> run_sets;
    auto* cfg_opt = run->add_option("--config", run_config);
    auto* replay_opt = run->add_option("--replay", run_replay, "Re-run the config stored in a run_record.json");
    cfg_opt->excludes(replay_opt);
    run->add_option("--set", run_sets, "Override a config key, e.g. --set pc.dv=50");
    run->add_option("--out", run_out);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Run the pipeline once per value of one axis");
    fs::path sw_config;
    std::string sw_axis, sw_values;
    std::vector<std::string> sw_sets;
    sweep->add_option("--config", sw_config)->required();
    sweep->add_option("--axis", sw_axis)->required()->check(CLI::IsMember({"dv", "patches", "mode", "knowledge"}));
    sweep->add_option("--values", sw_values, "Comma separated")->required();
    sweep->add_option("--set", sw_sets);

    // report
    auto* report = app.add_subcommand("report", "Print a run record or eval report as markdown");
    fs::path rp_path;
    report->add_option("path", rp_path)->required();

    // synth
    auto* synth = app.add_subcommand("synth", "Write the synthetic attribute-mixture dataset and a config");
    fs::path sy_out;
    synth::SyntheticConfig syc;
    synth->add_option("--out", sy_out)->required();
    synth->add_option("--seed", syc.seed);
    synth->add_option("--patches", syc.patches_per_image);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*patchify) {
            const auto r = stages::patchify(images_dir, n_segments, compactness, patch_out);
            std::cout << r.images << " images, " << r.patches << " patches\n";
        } else if (*neighbors) {
            stages::neighbors(nb_features, nb_k, nb_out);
        } else if (*train) {
            tc.validate();
            const auto summary = stages::train_pc(tr_manifest, tr_classes, tr_features, tr_knn, tc, tr_out);
            for (const auto& w : summary["warnings"]) std::cerr << "warning: " << w.get<std::string>() << "\n";
            if (!tr_log.empty()) write_file(tr_log, summary.dump(2) + "\n");
        } else if (*embed) {
            stages::embed(em_manifest, em_classes, em_heads, em_features, em_oracle, em_out, em_assign);
        } else if (*relate) {
            if (rl_relations.empty()) rl_relations = fs::path(rl_out).replace_extension(".relations.jsonl");
            stages::relate(rl_manifest, rl_classes, rl_knowledge, rl_seen, rl_mode, rc, rl_out, rl_relations);
        } else if (*eval) {
            if (ev_table.empty() && !ev_words) throw UsageError("eval-zsl needs --table or --word-table");
            const auto r = stages::eval_zsl(ev_manifest, ev_classes, ev_features, ev_table, ev_words, sc, ev_report);
            std::cout << std::fixed;
            std::cout.precision(2);
            std::cout << "T1 " << r.t1 << "  u " << r.gzsl_u << "  s " << r.gzsl_s << "  H " << r.gzsl_h << "\n";
        } else if (*run) {
            pipeline::RunConfig c;
            if (!run_replay.empty()) {
                const auto j = nlohmann::json::parse(read_file(run_replay), nullptr, false);
                if (j.is_discarded()) throw InputError(run_replay.string() + " is not valid JSON");
                c = pipeline::config_from_json(pipeline::record_from_json(j).config);
                for (const auto& s : run_sets) {
                    const auto eq = s.find('=');
                    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
                    pipeline::apply_setting(c, s.substr(0, eq), s.substr(eq + 1));
                }
            } else {
                if (run_config.empty() && run_sets.empty()) throw UsageError("run needs --config, --replay or --set");
                c = config_with_overrides(run_config, run_sets);
            }
            if (!run_out.empty()) c.out_dir = run_out;
            const auto record = pipeline::run_pipeline(c, &std::cerr);
            std::cout << pipeline::record_markdown(record);
        } else if (*sweep) {
            const auto c = config_with_overrides(sw_config, sw_sets);
            const auto axis = pipeline::parse_axis(sw_axis);
            const auto rows = pipeline::sweep(c, axis, split_values(sw_values), &std::cerr);
            std::cout << pipeline::sweep_markdown(axis, rows);
        } else if (*report) {
            print_report(rp_path);
        } else if (*synth) {
            const auto data = synth::generate(syc);
            synth::write_dataset(data, sy_out);
            pipeline::RunConfig c;
            c.manifest = "manifest.jsonl";
            c.patch_features = "patches.vgsf";
            c.image_features = "images.vgsf";
            c.out_dir = "run";
            c.train.clusters = 12;
            c.train.learning_rate = 1e-2;
            c.train.batch_size = 128;
            c.train.neighbor_k = 10;
            write_file(sy_out / "config.toml", pipeline::dump_config(c));
            std::cout << "wrote " << (sy_out / "config.toml").string() << "\n";
        }
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
