#include "vgse/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <unistd.h>

#include "vgse/checksum.hpp"
#include "vgse/error.hpp"
#include "vgse/manifest.hpp"
#include "vgse/stages.hpp"

namespace vgse::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(TableMode mode) {
    switch (mode) {
        case TableMode::wavg: return "wavg";
        case TableMode::smo: return "smo";
        case TableMode::oracle: return "oracle";
    }
    return "?";
}

TableMode parse_table_mode(const std::string& text) {
    if (text == "wavg") return TableMode::wavg;
    if (text == "smo") return TableMode::smo;
    if (text == "oracle") return TableMode::oracle;
    throw InputError("unknown mode '" + text + "' (expected wavg|smo|oracle)");
}

void RunConfig::validate() const {
    auto need = [](const fs::path& p, const char* what) {
        if (p.empty()) throw InputError(std::string("config: ") + what + " is not set");
        if (!fs::exists(p)) throw InputError(std::string("config: ") + what + " '" + p.string() + "' does not exist");
    };
    need(manifest, "data.manifest");
    need(classes.empty() ? companion_classes_path(manifest) : classes, "data.classes");
    need(patch_features, "data.patch_features");
    need(image_features, "data.image_features");
    if (!images.empty()) need(images, "data.images");
    if (!knowledge.empty()) need(knowledge, "data.knowledge");
    train_config().validate();
    if (n_segments < 1) throw InputError("config: patchgen.n_segments must be >= 1");
    if (compactness < 0) throw InputError("config: patchgen.compactness must be >= 0");
    if (sje.epochs < 0 || !(sje.learning_rate > 0)) throw InputError("config: bad sje settings");
}

pc::TrainConfig RunConfig::train_config() const {
    auto t = train;
    t.seed = seed;
    return t;
}

zsl::SjeConfig RunConfig::sje_config() const {
    auto s = sje;
    s.seed = seed;
    return s;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    std::istringstream in(value);
    T out{};
    in >> out;
    if (!in || !in.eof()) throw InputError("config: " + key + " = '" + value + "' is not a valid number");
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw InputError("config: " + key + " = '" + value + "' is not a boolean");
}

}  // namespace

std::map<std::string, std::string> parse_kv(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '#' && !quoted) {
                line.resize(i);
                break;
            }
        }
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw InputError("config line " + std::to_string(line_no) + ": bad section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InputError("config line " + std::to_string(line_no) + ": expected key = value");
        auto key = trim(line.substr(0, eq));
        auto value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        out[section.empty() ? key : section + "." + key] = value;
    }
    return out;
}

void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
    static const std::map<std::string, std::function<void(RunConfig&, const std::string&)>> setters = {
        {"data.manifest", [](RunConfig& c, const std::string& v) { c.manifest = v; }},
        {"data.classes", [](RunConfig& c, const std::string& v) { c.classes = v; }},
        {"data.patch_features", [](RunConfig& c, const std::string& v) { c.patch_features = v; }},
        {"data.image_features", [](RunConfig& c, const std::string& v) { c.image_features = v; }},
        {"data.images", [](RunConfig& c, const std::string& v) { c.images = v; }},
        {"data.knowledge", [](RunConfig& c, const std::string& v) { c.knowledge = v; }},
        {"run.out", [](RunConfig& c, const std::string& v) { c.out_dir = v; }},
        {"run.cache", [](RunConfig& c, const std::string& v) { c.cache_dir = v; }},
        {"run.seed", [](RunConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>("run.seed", v); }},
        {"run.mode", [](RunConfig& c, const std::string& v) { c.mode = parse_table_mode(v); }},
        {"pc.dv", [](RunConfig& c, const std::string& v) { c.train.clusters = parse_number<int>("pc.dv", v); }},
        {"pc.lambda", [](RunConfig& c, const std::string& v) { c.train.lambda = parse_number<double>("pc.lambda", v); }},
        {"pc.beta", [](RunConfig& c, const std::string& v) { c.train.beta = parse_number<double>("pc.beta", v); }},
        {"pc.gamma", [](RunConfig& c, const std::string& v) { c.train.gamma = parse_number<double>("pc.gamma", v); }},
        {"pc.lr", [](RunConfig& c, const std::string& v) { c.train.learning_rate = parse_number<double>("pc.lr", v); }},
        {"pc.batch_size", [](RunConfig& c, const std::string& v) { c.train.batch_size = parse_number<int>("pc.batch_size", v); }},
        {"pc.epochs", [](RunConfig& c, const std::string& v) { c.train.epochs = parse_number<int>("pc.epochs", v); }},
        {"pc.neighbor_k", [](RunConfig& c, const std::string& v) { c.train.neighbor_k = parse_number<int>("pc.neighbor_k", v); }},
        {"cr.eta", [](RunConfig& c, const std::string& v) { c.relation.eta = parse_number<double>("cr.eta", v); }},
        {"cr.neighbors", [](RunConfig& c, const std::string& v) { c.relation.n_neighbors = parse_number<int>("cr.neighbors", v); }},
        {"cr.alpha", [](RunConfig& c, const std::string& v) { c.relation.alpha = parse_number<double>("cr.alpha", v); }},
        {"cr.tol", [](RunConfig& c, const std::string& v) { c.relation.tol = parse_number<double>("cr.tol", v); }},
        {"cr.max_iter", [](RunConfig& c, const std::string& v) { c.relation.max_iter = parse_number<int>("cr.max_iter", v); }},
        {"cr.normalize_words", [](RunConfig& c, const std::string& v) { c.relation.normalize_words = parse_bool("cr.normalize_words", v); }},
        {"sje.lr", [](RunConfig& c, const std::string& v) { c.sje.learning_rate = parse_number<double>("sje.lr", v); }},
        {"sje.margin", [](RunConfig& c, const std::string& v) { c.sje.margin = parse_number<double>("sje.margin", v); }},
        {"sje.epochs", [](RunConfig& c, const std::string& v) { c.sje.epochs = parse_number<int>("sje.epochs", v); }},
        {"patchgen.n_segments", [](RunConfig& c, const std::string& v) { c.n_segments = parse_number<int>("patchgen.n_segments", v); }},
        {"patchgen.compactness", [](RunConfig& c, const std::string& v) { c.compactness = parse_number<double>("patchgen.compactness", v); }},
    };
    auto it = setters.find(key);
    if (it == setters.end()) throw InputError("config: unknown key '" + key + "'");
    it->second(c, value);
}

RunConfig load_config(const fs::path& path) {
    RunConfig c;
    for (const auto& [k, v] : parse_kv(read_file(path))) apply_setting(c, k, v);
    const auto base = path.has_parent_path() ? path.parent_path() : fs::path(".");
    for (fs::path* p : {&c.manifest, &c.classes, &c.patch_features, &c.image_features, &c.images, &c.knowledge,
                        &c.out_dir, &c.cache_dir}) {
        if (!p->empty() && p->is_relative()) *p = base / *p;
    }
    return c;
}

std::string dump_config(const RunConfig& c) {
    std::ostringstream o;
    o << std::setprecision(17);
    auto path = [](const fs::path& p) { return "\"" + p.string() + "\""; };
    o << "[data]\n"
      << "manifest = " << path(c.manifest) << "\n"
      << "classes = " << path(c.classes) << "\n"
      << "patch_features = " << path(c.patch_features) << "\n"
      << "image_features = " << path(c.image_features) << "\n"
      << "images = " << path(c.images) << "\n"
      << "knowledge = " << path(c.knowledge) << "\n\n"
      << "[run]\n"
      << "out = " << path(c.out_dir) << "\n"
      << "cache = " << path(c.cache_dir) << "\n"
      << "seed = " << c.seed << "\n"
      << "mode = " << to_string(c.mode) << "\n\n"
      << "[pc]\n"
      << "dv = " << c.train.clusters << "\n"
      << "lambda = " << c.train.lambda << "\n"
      << "beta = " << c.train.beta << "\n"
      << "gamma = " << c.train.gamma << "\n"
      << "lr = " << c.train.learning_rate << "\n"
      << "batch_size = " << c.train.batch_size << "\n"
      << "epochs = " << c.train.epochs << "\n"
      << "neighbor_k = " << c.train.neighbor_k << "\n\n"
      << "[cr]\n"
      << "eta = " << c.relation.eta << "\n"
      << "neighbors = " << c.relation.n_neighbors << "\n"
      << "alpha = " << c.relation.alpha << "\n"
      << "tol = " << c.relation.tol << "\n"
      << "max_iter = " << c.relation.max_iter << "\n"
      << "normalize_words = " << (c.relation.normalize_words ? "true" : "false") << "\n\n"
      << "[sje]\n"
      << "lr = " << c.sje.learning_rate << "\n"
      << "margin = " << c.sje.margin << "\n"
      << "epochs = " << c.sje.epochs << "\n\n"
      << "[patchgen]\n"
      << "n_segments = " << c.n_segments << "\n"
      << "compactness = " << c.compactness << "\n";
    return o.str();
}

json config_to_json(const RunConfig& c) {
    json j;
    j["data"] = {{"manifest", c.manifest.string()},       {"classes", c.classes.string()},
                 {"patch_features", c.patch_features.string()}, {"image_features", c.image_features.string()},
                 {"images", c.images.string()},           {"knowledge", c.knowledge.string()}};
    j["run"] = {{"out", c.out_dir.string()}, {"cache", c.cache_dir.string()}, {"seed", c.seed},
                {"mode", to_string(c.mode)}};
    j["pc"] = {{"dv", c.train.clusters},         {"lambda", c.train.lambda},
               {"beta", c.train.beta},           {"gamma", c.train.gamma},
               {"lr", c.train.learning_rate},    {"batch_size", c.train.batch_size},
               {"epochs", c.train.epochs},       {"neighbor_k", c.train.neighbor_k}};
    j["cr"] = {{"eta", c.relation.eta},   {"neighbors", c.relation.n_neighbors}, {"alpha", c.relation.alpha},
               {"tol", c.relation.tol},   {"max_iter", c.relation.max_iter},
               {"normalize_words", c.relation.normalize_words}};
    j["sje"] = {{"lr", c.sje.learning_rate}, {"margin", c.sje.margin}, {"epochs", c.sje.epochs}};
    j["patchgen"] = {{"n_segments", c.n_segments}, {"compactness", c.compactness}};
    return j;
}

RunConfig config_from_json(const json& j) {
    RunConfig c;
    try {
        const auto& d = j.at("data");
        c.manifest = d.at("manifest").get<std::string>();
        c.classes = d.at("classes").get<std::string>();
        c.patch_features = d.at("patch_features").get<std::string>();
        c.image_features = d.at("image_features").get<std::string>();
        c.images = d.at("images").get<std::string>();
        c.knowledge = d.at("knowledge").get<std::string>();
        const auto& r = j.at("run");
        c.out_dir = r.at("out").get<std::string>();
        c.cache_dir = r.at("cache").get<std::string>();
        c.seed = r.at("seed").get<std::uint64_t>();
        c.mode = parse_table_mode(r.at("mode").get<std::string>());
        const auto& p = j.at("pc");
        c.train.clusters = p.at("dv").get<int>();
        c.train.lambda = p.at("lambda").get<double>();
        c.train.beta = p.at("beta").get<double>();
        c.train.gamma = p.at("gamma").get<double>();
        c.train.learning_rate = p.at("lr").get<double>();
        c.train.batch_size = p.at("batch_size").get<int>();
        c.train.epochs = p.at("epochs").get<int>();
        c.train.neighbor_k = p.at("neighbor_k").get<int>();
        const auto& cr = j.at("cr");
        c.relation.eta = cr.at("eta").get<double>();
        c.relation.n_neighbors = cr.at("neighbors").get<int>();
        c.relation.alpha = cr.at("alpha").get<double>();
        c.relation.tol = cr.at("tol").get<double>();
        c.relation.max_iter = cr.at("max_iter").get<int>();
        c.relation.normalize_words = cr.at("normalize_words").get<bool>();
        const auto& s = j.at("sje");
        c.sje.learning_rate = s.at("lr").get<double>();
        c.sje.margin = s.at("margin").get<double>();
        c.sje.epochs = s.at("epochs").get<int>();
        const auto& pg = j.at("patchgen");
        c.n_segments = pg.at("n_segments").get<int>();
        c.compactness = pg.at("compactness").get<double>();
    } catch (const json::exception& e) {
        throw InputError(std::string("config snapshot: ") + e.what());
    }
    return c;
}

int RunRecord::skipped_stages() const {
    int n = 0;
    for (const auto& s : stages) n += s.skipped ? 1 : 0;
    return n;
}

json record_to_json(const RunRecord& r) {
    json j;
    j["config"] = r.config;
    j["stages"] = json::array();
    for (const auto& s : r.stages) {
        j["stages"].push_back({{"name", s.name},
                               {"key", s.key},
                               {"inputs", s.inputs},
                               {"outputs", s.outputs},
                               {"skipped", s.skipped},
                               {"seconds", s.seconds}});
    }
    j["metrics"] = {{"t1", r.metrics.t1}, {"u", r.metrics.u}, {"s", r.metrics.s}, {"h", r.metrics.h}};
    j["seconds"] = r.seconds;
    return j;
}

RunRecord record_from_json(const json& j) {
    RunRecord r;
    try {
        r.config = j.at("config");
        for (const auto& s : j.at("stages")) {
            StageRecord st;
            st.name = s.at("name").get<std::string>();
            st.key = s.at("key").get<std::string>();
            st.inputs = s.at("inputs").get<std::map<std::string, std::string>>();
            st.outputs = s.at("outputs").get<std::map<std::string, std::string>>();
            st.skipped = s.at("skipped").get<bool>();
            st.seconds = s.at("seconds").get<double>();
            r.stages.push_back(std::move(st));
        }
        const auto& m = j.at("metrics");
        r.metrics = {m.at("t1").get<double>(), m.at("u").get<double>(), m.at("s").get<double>(),
                     m.at("h").get<double>()};
        r.seconds = j.value("seconds", 0.0);
    } catch (const json::exception& e) {
        throw InputError(std::string("run record: ") + e.what());
    }
    return r;
}

fs::path resolve_cache_dir(const RunConfig& config) {
    if (!config.cache_dir.empty()) return config.cache_dir;
    if (const char* env = std::getenv("VGSE_CACHE_DIR"); env != nullptr && *env != '\0') return env;
    return config.out_dir / "cache";
}

namespace {

constexpr const char* kStageVersion = "1";

std::string digest(const fs::path& p) {
    if (fs::is_directory(p)) {
        std::vector<std::pair<std::string, std::string>> entries;
        for (const auto& e : fs::recursive_directory_iterator(p)) {
            if (e.is_regular_file()) entries.emplace_back(fs::relative(e.path(), p).generic_string(), sha256_file(e.path()));
        }
        std::sort(entries.begin(), entries.end());
        std::string joined;
        for (const auto& [name, sha] : entries) joined += name + "=" + sha + "\n";
        return sha256_hex(joined);
    }
    return sha256_file(p);
}

class StageRunner {
public:
    StageRunner(fs::path cache, std::ostream* log, RunRecord& record)
        : cache_(std::move(cache)), log_(log), record_(record) {}

    // Runs `body` into a fresh directory unless the content address already
    // exists; returns the stage directory.
    fs::path run(const std::string& name, const std::map<std::string, fs::path>& inputs, const json& params,
                 const std::vector<std::string>& outputs, const std::function<void(const fs::path&)>& body) {
        const auto start = std::chrono::steady_clock::now();
        StageRecord rec;
        rec.name = name;
        try {
            std::string material = std::string("stage=") + name + "\nversion=" + kStageVersion + "\nparams=" +
                                   params.dump() + "\n";
            for (const auto& [k, p] : inputs) {
                rec.inputs[k] = digest(p);
                material += k + "=" + rec.inputs[k] + "\n";
            }
            rec.key = sha256_hex(material);
            const auto dir = cache_ / (name + "-" + rec.key.substr(0, 16));
            if (fs::exists(dir / "DONE")) {
                rec.skipped = true;
            } else {
                const auto tmp = cache_ / (name + "-" + rec.key.substr(0, 16) + ".tmp-" + std::to_string(::getpid()));
                fs::remove_all(tmp);
                fs::create_directories(tmp);
                body(tmp);
                write_file(tmp / "DONE", material);
                fs::remove_all(dir);
                fs::rename(tmp, dir);
            }
            for (const auto& o : outputs) rec.outputs[o] = digest(dir / o);
            rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            if (log_) {
                *log_ << "[" << name << "] " << (rec.skipped ? "cached" : "done") << " " << rec.key.substr(0, 12) << " ("
                      << std::fixed << std::setprecision(2) << rec.seconds << "s)\n";
            }
            record_.stages.push_back(rec);
            return dir;
        } catch (const InputError& e) {
            throw InputError("stage " + name + " failed: " + e.what());
        } catch (const std::exception& e) {
            throw std::runtime_error("stage " + name + " failed: " + e.what());
        }
    }

private:
    fs::path cache_;
    std::ostream* log_;
    RunRecord& record_;
};

void copy_out(const fs::path& from, const fs::path& to) {
    fs::create_directories(to.parent_path());
    fs::copy_file(from, to, fs::copy_options::overwrite_existing);
}

}  // namespace

RunRecord run_pipeline(const RunConfig& config, std::ostream* log) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    const auto cache = resolve_cache_dir(config);
    fs::create_directories(cache);
    fs::create_directories(config.out_dir);

    RunRecord record;
    record.config = config_to_json(config);
    StageRunner stages(cache, log, record);

    const fs::path classes = config.classes.empty() ? companion_classes_path(config.manifest) : config.classes;
    const auto train_cfg = config.train_config();
    const auto sje_cfg = config.sje_config();

    if (!config.images.empty()) {
        const auto dir = stages.run("patchify", {{"images", config.images}},
                                    {{"n_segments", config.n_segments}, {"compactness", config.compactness}},
                                    {"patches/boxes.jsonl"}, [&](const fs::path& d) {
                                        stages::patchify(config.images, config.n_segments, config.compactness,
                                                         d / "patches");
                                    });
        copy_out(dir / "patches" / "boxes.jsonl", config.out_dir / "boxes.jsonl");
    }

    const auto nb = stages.run(
        "neighbors", {{"manifest", config.manifest}, {"classes", classes}, {"patch_features", config.patch_features}},
        {{"k", train_cfg.neighbor_k}}, {"train.vgsf", "knn.bin"}, [&](const fs::path& d) {
            stages::select_train(config.manifest, classes, config.patch_features, d / "train.vgsf");
            stages::neighbors(d / "train.vgsf", train_cfg.neighbor_k, d / "knn.bin");
        });

    const json train_params = {{"dv", train_cfg.clusters},         {"lambda", train_cfg.lambda},
                               {"beta", train_cfg.beta},           {"gamma", train_cfg.gamma},
                               {"lr", train_cfg.learning_rate},    {"batch_size", train_cfg.batch_size},
                               {"epochs", train_cfg.epochs},       {"seed", train_cfg.seed}};
    const auto tr = stages.run("train-pc",
                               {{"manifest", config.manifest},
                                {"classes", classes},
                                {"train", nb / "train.vgsf"},
                                {"knn", nb / "knn.bin"}},
                               train_params, {"heads.vgsp"}, [&](const fs::path& d) {
                                   const auto summary = stages::train_pc(config.manifest, classes, nb / "train.vgsf",
                                                                         nb / "knn.bin", train_cfg, d / "heads.vgsp");
                                   write_file(d / "train_log.json", summary.dump(2) + "\n");
                                   if (log) {
                                       for (const auto& w : summary["warnings"]) *log << "warning: " << w.get<std::string>() << "\n";
                                   }
                               });

    const bool oracle = config.mode == TableMode::oracle;
    const auto em = stages.run(
        "embed",
        {{"manifest", config.manifest}, {"classes", classes}, {"heads", tr / "heads.vgsp"},
         {"patch_features", config.patch_features}},
        {{"oracle", oracle}}, {"phi_seen.vgsf"}, [&](const fs::path& d) {
            stages::embed(config.manifest, classes, tr / "heads.vgsp", config.patch_features, oracle,
                          d / "phi_seen.vgsf");
        });

    std::map<std::string, fs::path> relate_inputs = {
        {"manifest", config.manifest}, {"classes", classes}, {"phi_seen", em / "phi_seen.vgsf"}};
    if (!config.knowledge.empty()) relate_inputs["knowledge"] = config.knowledge;
    const json relate_params = {{"mode", to_string(config.mode)},     {"eta", config.relation.eta},
                                {"neighbors", config.relation.n_neighbors}, {"alpha", config.relation.alpha},
                                {"tol", config.relation.tol},         {"max_iter", config.relation.max_iter},
                                {"normalize_words", config.relation.normalize_words}};
    const auto rel = stages.run("relate", relate_inputs, relate_params, {"phi_full.vgsf"}, [&](const fs::path& d) {
        stages::relate(config.manifest, classes, config.knowledge, em / "phi_seen.vgsf", to_string(config.mode),
                       config.relation, d / "phi_full.vgsf", d / "relations.jsonl");
    });

    const auto ev = stages.run(
        "eval-zsl",
        {{"manifest", config.manifest}, {"classes", classes}, {"image_features", config.image_features},
         {"phi_full", rel / "phi_full.vgsf"}},
        {{"lr", sje_cfg.learning_rate}, {"margin", sje_cfg.margin}, {"epochs", sje_cfg.epochs}, {"seed", sje_cfg.seed}},
        {"report.json"}, [&](const fs::path& d) {
            stages::eval_zsl(config.manifest, classes, config.image_features, rel / "phi_full.vgsf", false, sje_cfg,
                             d / "report.json");
        });

    copy_out(nb / "knn.bin", config.out_dir / "knn.bin");
    copy_out(tr / "heads.vgsp", config.out_dir / "heads.vgsp");
    copy_out(tr / "train_log.json", config.out_dir / "train_log.json");
    copy_out(em / "phi_seen.vgsf", config.out_dir / "phi_seen.vgsf");
    copy_out(rel / "phi_full.vgsf", config.out_dir / "phi_full.vgsf");
    copy_out(rel / "relations.jsonl", config.out_dir / "relations.jsonl");
    copy_out(ev / "report.json", config.out_dir / "report.json");

    const auto report = zsl::read_report(ev / "report.json");
    record.metrics = {report.t1, report.gzsl_u, report.gzsl_s, report.gzsl_h};
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_file(config.out_dir / "run_record.json", record_to_json(record).dump(2) + "\n");
    return record;
}

const char* to_string(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::dv: return "dv";
        case SweepAxis::patches: return "patches";
        case SweepAxis::mode: return "mode";
        case SweepAxis::knowledge: return "knowledge";
    }
    return "?";
}

SweepAxis parse_axis(const std::string& text) {
    if (text == "dv") return SweepAxis::dv;
    if (text == "patches") return SweepAxis::patches;
    if (text == "mode") return SweepAxis::mode;
    if (text == "knowledge") return SweepAxis::knowledge;
    throw InputError("unknown sweep axis '" + text + "' (expected dv|patches|mode|knowledge)");
}

namespace {

std::string slug(const std::string& value) {
    std::string out;
    for (char ch : fs::path(value).stem().string().empty() ? value : fs::path(value).stem().string()) {
        out.push_back(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '.' ? ch : '_');
    }
    return out;
}

}  // namespace

RunConfig sweep_point(const RunConfig& base, SweepAxis axis, const std::string& value) {
    RunConfig c = base;
    switch (axis) {
        case SweepAxis::dv:
            apply_setting(c, "pc.dv", value);
            break;
        case SweepAxis::patches: {
            auto templ = base.patch_features.string();
            const auto at = templ.find("{n}");
            if (at == std::string::npos) {
                throw InputError("patches sweep needs a '{n}' placeholder in data.patch_features");
            }
            templ.replace(at, 3, value);
            c.patch_features = templ;
            break;
        }
        case SweepAxis::mode:
            c.mode = parse_table_mode(value);
            break;
        case SweepAxis::knowledge:
            c.knowledge = value;
            break;
    }
    c.out_dir = base.out_dir / (std::string(to_string(axis)) + "-" + slug(value));
    c.cache_dir = resolve_cache_dir(base);
    return c;
}

std::vector<SweepRow> sweep(const RunConfig& base, SweepAxis axis, const std::vector<std::string>& values,
                            std::ostream* log) {
    if (values.empty()) throw InputError("sweep: no values given");
    std::vector<SweepRow> rows;
    for (const auto& v : values) {
        if (log) *log << "== " << to_string(axis) << " = " << v << "\n";
        const auto record = run_pipeline(sweep_point(base, axis, v), log);
        rows.push_back({v, record.metrics, record.skipped_stages(), static_cast<int>(record.stages.size())});
    }
    fs::create_directories(base.out_dir);
    write_file(base.out_dir / "sweep.csv", sweep_csv(axis, rows));
    write_file(base.out_dir / "sweep.md", sweep_markdown(axis, rows));
    return rows;
}

std::string sweep_csv(SweepAxis axis, const std::vector<SweepRow>& rows) {
    std::ostringstream o;
    o << to_string(axis) << ",t1,u,s,h,cached_stages,stages\n" << std::fixed << std::setprecision(2);
    for (const auto& r : rows) {
        o << r.value << ',' << r.metrics.t1 << ',' << r.metrics.u << ',' << r.metrics.s << ',' << r.metrics.h << ','
          << r.skipped_stages << ',' << r.total_stages << '\n';
    }
    return o.str();
}

std::string sweep_markdown(SweepAxis axis, const std::vector<SweepRow>& rows) {
    std::ostringstream o;
    o << "| " << to_string(axis) << " | T1 | u | s | H | cached |\n|---|---|---|---|---|---|\n"
      << std::fixed << std::setprecision(1);
    for (const auto& r : rows) {
        o << "| " << r.value << " | " << r.metrics.t1 << " | " << r.metrics.u << " | " << r.metrics.s << " | "
          << r.metrics.h << " | " << r.skipped_stages << "/" << r.total_stages << " |\n";
    }
    return o.str();
}

std::string record_markdown(const RunRecord& record) {
    std::ostringstream o;
    o << "| stage | key | cached | seconds |\n|---|---|---|---|\n" << std::fixed << std::setprecision(2);
    for (const auto& s : record.stages) {
        o << "| " << s.name << " | " << s.key.substr(0, 12) << " | " << (s.skipped ? "yes" : "no") << " | "
          << s.seconds << " |\n";
    }
    o << "\n| T1 | u | s | H |\n|---|---|---|---|\n"
      << "| " << record.metrics.t1 << " | " << record.metrics.u << " | " << record.metrics.s << " | "
      << record.metrics.h << " |\n";
    return o.str();
}

}  // namespace vgse::pipeline
