#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "vgse/checksum.hpp"
#include "vgse/rng.hpp"
#include "vgse/types.hpp"

namespace vgse::test {

// Scratch directory removed on scope exit.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("vgse-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline Vector vec(std::initializer_list<double> values) {
    Vector v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values) v(i++) = x;
    return v;
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, scale);
    }
    return m;
}

// n_seen + n_unseen classes with random word vectors; `per_class` train
// images per seen class and one test image per class.
inline DatasetManifest toy_manifest(int n_seen, int n_unseen, int word_dim, Rng& rng, int per_class = 1) {
    std::vector<ClassRecord> classes;
    for (int c = 0; c < n_seen + n_unseen; ++c) {
        ClassRecord r;
        r.class_id = c;
        r.name = "class" + std::to_string(c);
        r.role = c < n_seen ? ClassRole::seen : ClassRole::unseen;
        r.word_embedding = random_matrix(1, word_dim, rng).row(0).transpose();
        classes.push_back(r);
    }
    std::vector<ImageRecord> images;
    ImageId next = 0;
    for (int c = 0; c < n_seen + n_unseen; ++c) {
        if (c < n_seen) {
            for (int i = 0; i < per_class; ++i) images.push_back({next++, c, Split::train});
            images.push_back({next++, c, Split::test_seen});
        } else {
            images.push_back({next++, c, Split::test_unseen});
        }
    }
    return DatasetManifest(std::move(classes), std::move(images));
}

}  // namespace vgse::test
