#include "vgse/features.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "vgse/checksum.hpp"
#include "vgse/error.hpp"

namespace vgse {

namespace {

constexpr char kMagic[4] = {'V', 'G', 'S', 'F'};
constexpr std::uint8_t kVersion = 0x01;
constexpr std::size_t kHeaderBytes = 4 + 1 + 4 + 4;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::string& in, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
    return v;
}

struct RowIdHash {
    std::size_t operator()(const RowId& r) const {
        return std::hash<std::int64_t>()(r.image_id) * 31u + std::hash<std::int64_t>()(r.patch_index);
    }
};

std::string describe(const RowId& r) {
    return "(image_id=" + std::to_string(r.image_id) + ", patch_index=" + std::to_string(r.patch_index) + ")";
}

}  // namespace

std::string encode_vgsf(const VgsfContainer& c) {
    if (c.values.size() != static_cast<std::size_t>(c.n_rows) * c.dim) {
        throw UsageError("container payload size does not match n_rows*dim");
    }
    if (c.trailer.size() != c.n_rows) throw UsageError("container trailer must have one entry per row");
    std::string out(kMagic, 4);
    out.push_back(static_cast<char>(kVersion));
    put_u32(out, c.n_rows);
    put_u32(out, c.dim);
    out.reserve(out.size() + c.values.size() * 4);
    for (float f : c.values) put_u32(out, std::bit_cast<std::uint32_t>(f));
    for (const auto& j : c.trailer) {
        out += j.dump();
        out.push_back('\n');
    }
    return out;
}

VgsfContainer decode_vgsf(const std::string& bytes) {
    if (bytes.size() < kHeaderBytes) {
        throw InputError("feature container truncated: header needs " + std::to_string(kHeaderBytes) +
                         " bytes, got " + std::to_string(bytes.size()));
    }
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw InputError("bad magic: not a VGSF container");
    if (static_cast<std::uint8_t>(bytes[4]) != kVersion) {
        throw InputError("unsupported VGSF version " + std::to_string(static_cast<unsigned char>(bytes[4])));
    }
    VgsfContainer c;
    c.n_rows = get_u32(bytes, 5);
    c.dim = get_u32(bytes, 9);
    const std::size_t count = static_cast<std::size_t>(c.n_rows) * c.dim;
    const std::size_t payload = count * 4;
    const std::size_t available = bytes.size() - kHeaderBytes;
    if (available < payload) {
        throw InputError("feature payload truncated: expected " + std::to_string(payload) + " bytes, found " +
                         std::to_string(available));
    }
    c.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) c.values[i] = std::bit_cast<float>(get_u32(bytes, kHeaderBytes + 4 * i));

    std::istringstream trailer(bytes.substr(kHeaderBytes + payload));
    std::string line;
    while (std::getline(trailer, line)) {
        if (line.empty()) continue;
        try {
            c.trailer.push_back(nlohmann::json::parse(line));
        } catch (const std::exception& e) {
            throw InputError("bad row id line " + std::to_string(c.trailer.size()) + ": " + e.what());
        }
    }
    if (c.trailer.size() != c.n_rows) {
        throw InputError("row id trailer has " + std::to_string(c.trailer.size()) + " entries, header declares " +
                         std::to_string(c.n_rows));
    }
    return c;
}

VgsfContainer read_vgsf(const std::filesystem::path& path) {
    try {
        return decode_vgsf(read_file(path));
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

void write_vgsf(const VgsfContainer& container, const std::filesystem::path& path) {
    write_file(path, encode_vgsf(container));
}

FeatureMatrix features_from_container(const VgsfContainer& c) {
    FeatureMatrix fm;
    fm.values = Eigen::Map<const MatrixF>(c.values.data(), c.n_rows, c.dim);
    fm.row_ids.reserve(c.n_rows);
    std::unordered_set<RowId, RowIdHash> seen;
    for (std::size_t i = 0; i < c.trailer.size(); ++i) {
        const auto& j = c.trailer[i];
        RowId id;
        try {
            id.image_id = j.at("image_id").get<ImageId>();
            id.patch_index = j.at("patch_index").get<std::int64_t>();
        } catch (const nlohmann::json::exception& e) {
            throw InputError("row id " + std::to_string(i) + ": " + e.what());
        }
        if (!seen.insert(id).second) throw InputError("duplicate row id " + describe(id));
        if (!fm.values.row(static_cast<Eigen::Index>(i)).allFinite()) {
            throw InputError("non-finite value in row " + std::to_string(i) + " " + describe(id));
        }
        fm.row_ids.push_back(id);
    }
    return fm;
}

VgsfContainer to_container(const FeatureMatrix& features) {
    VgsfContainer c;
    c.n_rows = static_cast<std::uint32_t>(features.rows());
    c.dim = static_cast<std::uint32_t>(features.dim());
    c.values.assign(features.values.data(), features.values.data() + features.values.size());
    for (const auto& r : features.row_ids) {
        c.trailer.push_back({{"image_id", r.image_id}, {"patch_index", r.patch_index}});
    }
    return c;
}

FeatureMatrix load_features(const std::filesystem::path& path) {
    try {
        return features_from_container(read_vgsf(path));
    } catch (const InputError& e) {
        const std::string msg = e.what();
        if (msg.rfind(path.string(), 0) == 0) throw;
        throw InputError(path.string() + ": " + msg);
    }
}

FeatureMatrix load_features(const std::filesystem::path& path, const DatasetManifest& manifest, int max_patches) {
    auto fm = load_features(path);
    try {
        validate_features(fm, manifest, max_patches);
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
    return fm;
}

void save_features(const FeatureMatrix& features, const std::filesystem::path& path) {
    write_vgsf(to_container(features), path);
}

void validate_features(const FeatureMatrix& features, const DatasetManifest& manifest, int max_patches) {
    std::unordered_map<ImageId, int> counts;
    for (const auto& r : features.row_ids) {
        if (!manifest.has_image(r.image_id)) throw InputError("row id " + describe(r) + " references unknown image");
        ++counts[r.image_id];
    }
    if (max_patches > 0) {
        for (const auto& [id, n] : counts) {
            if (n > max_patches) {
                throw InputError("image " + std::to_string(id) + " has " + std::to_string(n) +
                                 " patch rows, limit is " + std::to_string(max_patches));
            }
        }
    }
}

}  // namespace vgse
