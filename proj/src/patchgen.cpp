#include "vgse/patchgen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <string>
#include <tuple>

#include "vgse/checksum.hpp"
#include "vgse/error.hpp"

namespace vgse::patchgen {

std::vector<double> gradient_magnitude(const Image& image) {
    std::vector<double> grad(image.pixels(), 0.0);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            double best = 0.0;
            for (int c = 0; c < image.channels; ++c) {
                const double v = image.at(y, x, c);
                const double dx = x + 1 < image.width ? image.at(y, x + 1, c) - v : 0.0;
                const double dy = y + 1 < image.height ? image.at(y + 1, x, c) - v : 0.0;
                best = std::max(best, std::sqrt(dx * dx + dy * dy));
            }
            grad[static_cast<std::size_t>(y) * image.width + x] = best;
        }
    }
    return grad;
}

std::vector<std::pair<int, int>> grid_seeds(int width, int height, int n_segments) {
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_segments))));
    const int rows = (n_segments + cols - 1) / cols;
    std::vector<std::pair<int, int>> seeds;
    for (int r = 0; r < rows; ++r) {
        const int in_row = r + 1 < rows ? cols : n_segments - cols * (rows - 1);
        const int y = std::min(height - 1, static_cast<int>((r + 0.5) * height / rows));
        for (int c = 0; c < in_row; ++c) {
            const int x = std::min(width - 1, static_cast<int>((c + 0.5) * width / in_row));
            seeds.emplace_back(y, x);
        }
    }
    return seeds;
}

SegmentLabelMap compact_watershed(const Image& image, int n_segments, double compactness) {
    if (image.empty()) throw InputError("compact_watershed: empty image");
    if (n_segments < 1) throw InputError("compact_watershed: n_segments must be >= 1");
    if (static_cast<std::size_t>(n_segments) > image.pixels()) {
        throw InputError("compact_watershed: n_segments (" + std::to_string(n_segments) + ") exceeds pixel count (" +
                         std::to_string(image.pixels()) + ")");
    }
    if (!(compactness >= 0.0)) throw InputError("compact_watershed: compactness must be non-negative");

    const int w = image.width;
    const int h = image.height;
    const auto grad = gradient_magnitude(image);

    SegmentLabelMap out;
    out.width = w;
    out.height = h;
    out.labels.assign(image.pixels(), -1);

    // (priority, distance to seed, insertion order, pixel, label). Equal
    // priorities go to the nearer seed, then first-in first-out.
    using Entry = std::tuple<double, double, std::uint64_t, std::size_t, int>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
    std::uint64_t age = 0;

    std::vector<std::pair<int, int>> seed_of;
    for (auto [sy, sx] : grid_seeds(w, h, n_segments)) {
        const auto p = static_cast<std::size_t>(sy) * w + sx;
        if (out.labels[p] != -1) continue;  // coincident seed on a degenerate image
        const int label = static_cast<int>(seed_of.size());
        out.labels[p] = label;
        seed_of.emplace_back(sy, sx);
        heap.emplace(grad[p], 0.0, age++, p, label);
    }
    out.n_segments = static_cast<int>(seed_of.size());

    auto push_neighbors = [&](std::size_t p, int label) {
        const int y = static_cast<int>(p / w);
        const int x = static_cast<int>(p % w);
        const auto [sy, sx] = seed_of[static_cast<std::size_t>(label)];
        constexpr int dy[4] = {-1, 0, 0, 1};
        constexpr int dx[4] = {0, -1, 1, 0};
        for (int k = 0; k < 4; ++k) {
            const int ny = y + dy[k];
            const int nx = x + dx[k];
            if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
            const auto q = static_cast<std::size_t>(ny) * w + nx;
            if (out.labels[q] != -1) continue;
            const double dist = std::hypot(static_cast<double>(ny - sy), static_cast<double>(nx - sx));
            heap.emplace(grad[q] + compactness * dist, dist, age++, q, label);
        }
    };

    std::vector<char> expanded(image.pixels(), 0);
    while (!heap.empty()) {
        const auto [prio, dist, order, p, label] = heap.top();
        heap.pop();
        if (expanded[p]) continue;
        if (out.labels[p] == -1) out.labels[p] = label;
        else if (out.labels[p] != label) continue;
        expanded[p] = 1;
        push_neighbors(p, label);
    }
    return out;
}

std::vector<PatchBox> segment_boxes(const SegmentLabelMap& labels) {
    std::vector<PatchBox> boxes(static_cast<std::size_t>(labels.n_segments));
    for (int s = 0; s < labels.n_segments; ++s) {
        boxes[static_cast<std::size_t>(s)] = {s, std::numeric_limits<int>::max(), std::numeric_limits<int>::max(), -1, -1};
    }
    for (int y = 0; y < labels.height; ++y) {
        for (int x = 0; x < labels.width; ++x) {
            auto& b = boxes[static_cast<std::size_t>(labels.at(y, x))];
            b.x0 = std::min(b.x0, x);
            b.y0 = std::min(b.y0, y);
            b.x1 = std::max(b.x1, x + 1);
            b.y1 = std::max(b.y1, y + 1);
        }
    }
    std::erase_if(boxes, [](const PatchBox& b) { return b.x1 < 0; });
    return boxes;
}

std::vector<Patch> bbox_crop(const Image& image, const SegmentLabelMap& labels, int min_side) {
    if (labels.width != image.width || labels.height != image.height) {
        throw InputError("bbox_crop: label map is " + std::to_string(labels.width) + "x" +
                         std::to_string(labels.height) + ", image is " + std::to_string(image.width) + "x" +
                         std::to_string(image.height));
    }
    std::vector<Patch> patches;
    for (const auto& box : segment_boxes(labels)) {
        const int pw = std::max(box.width(), min_side);
        const int ph = std::max(box.height(), min_side);
        Image crop(pw, ph, image.channels);
        for (int y = 0; y < ph; ++y) {
            const int sy = box.y0 + std::min(y, box.height() - 1);
            for (int x = 0; x < pw; ++x) {
                const int sx = box.x0 + std::min(x, box.width() - 1);
                for (int c = 0; c < image.channels; ++c) crop.at(y, x, c) = image.at(sy, sx, c);
            }
        }
        patches.push_back({box, std::move(crop)});
    }
    return patches;
}

namespace {

// Next whitespace-separated header token, skipping '#' comments.
std::string pnm_token(const std::string& bytes, std::size_t& pos) {
    while (pos < bytes.size()) {
        if (bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
            ++pos;
        } else {
            break;
        }
    }
    const auto start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return bytes.substr(start, pos - start);
}

}  // namespace

Image read_pnm(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    std::size_t pos = 0;
    const auto magic = pnm_token(bytes, pos);
    if (magic != "P5" && magic != "P6") throw InputError(path.string() + ": only binary P5/P6 netpbm is supported");
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(pnm_token(bytes, pos));
        h = std::stoi(pnm_token(bytes, pos));
        maxval = std::stoi(pnm_token(bytes, pos));
    } catch (const std::exception&) {
        throw InputError(path.string() + ": malformed netpbm header");
    }
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) throw InputError(path.string() + ": unsupported netpbm dims");
    ++pos;  // single whitespace after maxval
    const int channels = magic == "P6" ? 3 : 1;
    Image img(w, h, channels);
    if (bytes.size() < pos + img.data.size()) throw InputError(path.string() + ": truncated pixel data");
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        img.data[i] = static_cast<float>(static_cast<unsigned char>(bytes[pos + i])) / static_cast<float>(maxval);
    }
    return img;
}

void write_pnm(const Image& image, const std::filesystem::path& path) {
    if (image.channels != 1 && image.channels != 3) throw InputError("write_pnm: need 1 or 3 channels");
    std::string out = (image.channels == 3 ? "P6\n" : "P5\n") + std::to_string(image.width) + " " +
                      std::to_string(image.height) + "\n255\n";
    out.reserve(out.size() + image.data.size());
    for (float v : image.data) {
        out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f))));
    }
    write_file(path, out);
}

}  // namespace vgse::patchgen
