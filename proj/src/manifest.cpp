#include "vgse/manifest.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "vgse/checksum.hpp"
#include "vgse/error.hpp"

namespace vgse {

namespace {

using nlohmann::json;

// Non-blank lines parsed as JSON objects; errors carry the 0-based record index.
std::vector<json> read_jsonl(const std::filesystem::path& path, const char* kind) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    std::vector<json> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = json::parse(line);
            if (!j.is_object()) throw InputError("not a JSON object");
            records.push_back(std::move(j));
        } catch (const std::exception& e) {
            throw InputError(path.string() + ": " + kind + " record " + std::to_string(records.size()) +
                             " (line " + std::to_string(line_no) + "): " + e.what());
        }
    }
    return records;
}

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) throw InputError(where + ": missing field \"" + key + "\"");
    try {
        return it->get<T>();
    } catch (const json::exception& e) {
        throw InputError(where + ": bad field \"" + key + "\": " + e.what());
    }
}

}  // namespace

std::filesystem::path companion_classes_path(const std::filesystem::path& manifest) {
    auto out = manifest;
    out.replace_extension(".classes.jsonl");
    return out;
}

std::vector<ClassRecord> load_class_records(const std::filesystem::path& path) {
    std::vector<ClassRecord> classes;
    const auto records = read_jsonl(path, "class");
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto where = path.string() + ": class record " + std::to_string(i);
        const auto& j = records[i];
        ClassRecord c;
        c.class_id = static_cast<ClassId>(i);
        c.name = field<std::string>(j, "class", where);
        c.role = j.contains("role") ? parse_role(field<std::string>(j, "role", where)) : ClassRole::seen;
        const auto w2v = field<std::vector<double>>(j, "w2v", where);
        c.word_embedding = Eigen::Map<const Vector>(w2v.data(), static_cast<Eigen::Index>(w2v.size()));
        classes.push_back(std::move(c));
    }
    return classes;
}

DatasetManifest load_manifest(const std::filesystem::path& images_path) {
    return load_manifest(images_path, companion_classes_path(images_path));
}

DatasetManifest load_manifest(const std::filesystem::path& images_path,
                              const std::filesystem::path& classes_path) {
    auto classes = load_class_records(classes_path);
    std::unordered_map<std::string, ClassId> by_name;
    for (const auto& c : classes) by_name.emplace(c.name, c.class_id);

    std::vector<ImageRecord> images;
    const auto records = read_jsonl(images_path, "image");
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto where = images_path.string() + ": image record " + std::to_string(i);
        const auto& j = records[i];
        ImageRecord img;
        img.image_id = field<ImageId>(j, "image_id", where);
        const auto& cls = j.contains("class") ? j.at("class") : json();
        if (cls.is_string()) {
            auto it = by_name.find(cls.get<std::string>());
            if (it == by_name.end()) throw InputError(where + ": unknown class '" + cls.get<std::string>() + "'");
            img.class_id = it->second;
        } else if (cls.is_number_integer()) {
            img.class_id = cls.get<ClassId>();
        } else {
            throw InputError(where + ": field \"class\" must be a class name or id");
        }
        img.split = parse_split(field<std::string>(j, "split", where));
        images.push_back(img);
    }
    return DatasetManifest(std::move(classes), std::move(images));
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& images_path) {
    std::ostringstream cls;
    for (const auto& c : manifest.classes()) {
        json j;
        j["class"] = c.name;
        j["role"] = to_string(c.role);
        j["w2v"] = std::vector<double>(c.word_embedding.data(), c.word_embedding.data() + c.word_embedding.size());
        cls << j.dump() << '\n';
    }
    write_file(companion_classes_path(images_path), cls.str());

    std::ostringstream img;
    for (const auto& r : manifest.images()) {
        json j;
        j["image_id"] = r.image_id;
        j["class"] = manifest.class_record(r.class_id).name;
        j["split"] = to_string(r.split);
        img << j.dump() << '\n';
    }
    write_file(images_path, img.str());
}

DatasetManifest with_knowledge(const DatasetManifest& manifest, const std::vector<ClassRecord>& knowledge) {
    std::unordered_map<std::string, const ClassRecord*> by_name;
    for (const auto& k : knowledge) by_name.emplace(k.name, &k);
    auto classes = manifest.classes();
    for (auto& c : classes) {
        auto it = by_name.find(c.name);
        if (it == by_name.end()) throw InputError("knowledge source has no vector for class '" + c.name + "'");
        c.word_embedding = it->second->word_embedding;
    }
    return DatasetManifest(std::move(classes), manifest.images());
}

}  // namespace vgse
