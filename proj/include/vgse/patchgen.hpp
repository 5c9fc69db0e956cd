#pragma once

#include <filesystem>
#include <vector>

namespace vgse::patchgen {

// Interleaved H×W×C intensities, nominally in [0, 1].
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<float> data;

    Image() = default;
    Image(int w, int h, int c, float fill = 0.0f)
        : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

    bool empty() const { return data.empty(); }
    std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
    float& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
    float at(int y, int x, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
    bool operator==(const Image&) const = default;
};

struct SegmentLabelMap {
    int width = 0;
    int height = 0;
    int n_segments = 0;
    std::vector<int> labels;  // row-major, values in [0, n_segments)

    int at(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

// Inclusive-exclusive pixel box.
struct PatchBox {
    int segment_id = 0;
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    bool operator==(const PatchBox&) const = default;
};

struct Patch {
    PatchBox box;
    Image image;
};

inline constexpr int kDefaultSegments = 9;
inline constexpr double kDefaultCompactness = 0.01;
inline constexpr int kMinPatchSide = 16;

// Per-pixel edge strength: max over channels of the forward-difference
// gradient magnitude.
std::vector<double> gradient_magnitude(const Image& image);

// Seed pixels (y, x) on a ceil(sqrt(n))-column grid; the last row holds the
// remainder, spread evenly across the width.
std::vector<std::pair<int, int>> grid_seeds(int width, int height, int n_segments);

// Seeded flooding with priority gradient + compactness * distance-to-seed.
// Throws InputError when n_segments exceeds the pixel count.
SegmentLabelMap compact_watershed(const Image& image, int n_segments, double compactness = kDefaultCompactness);

std::vector<PatchBox> segment_boxes(const SegmentLabelMap& labels);

// One patch per segment, cropped to the segment's tight bounding box. Crops
// narrower or shorter than `min_side` are edge-padded at the right/bottom.
std::vector<Patch> bbox_crop(const Image& image, const SegmentLabelMap& labels, int min_side = kMinPatchSide);

// Binary netpbm (P5 grey / P6 RGB, maxval <= 255).
Image read_pnm(const std::filesystem::path& path);
void write_pnm(const Image& image, const std::filesystem::path& path);

}  // namespace vgse::patchgen
