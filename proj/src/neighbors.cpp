#include "vgse/neighbors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <string>

#include "vgse/checksum.hpp"
#include "vgse/error.hpp"

namespace vgse::knn {

NeighborIndex build_knn(const FeatureMatrix& features, int k) {
    const Eigen::Index n = features.rows();
    if (k < 1 || k >= n) {
        throw InputError("build_knn: k=" + std::to_string(k) + " must satisfy 1 <= k < n_rows=" + std::to_string(n));
    }
    const MatrixF& xf = features.values;
    Vector sq(n);
    for (Eigen::Index i = 0; i < n; ++i) sq(i) = features.row(i).squaredNorm();
    const double max_sq = n > 0 ? sq.maxCoeff() : 0.0;

    NeighborIndex out;
    out.k = k;
    out.neighbor_ids.resize(n, k);
    out.distances.resize(n, k);

    constexpr Eigen::Index kBlock = 64;
    const Eigen::Index n_blocks = (n + kBlock - 1) / kBlock;
#pragma omp parallel for schedule(dynamic)
    for (Eigen::Index b = 0; b < n_blocks; ++b) {
        const Eigen::Index begin = b * kBlock;
        const Eigen::Index len = std::min(kBlock, n - begin);
        // Float Gram products screen candidates; everything within the
        // screening error of the k-th candidate is re-ranked in double.
        const MatrixF cross = xf.middleRows(begin, len) * xf.transpose();
        std::vector<std::pair<double, std::uint32_t>> cand(static_cast<std::size_t>(n));
        std::vector<std::pair<double, std::uint32_t>> exact;
        for (Eigen::Index r = 0; r < len; ++r) {
            const Eigen::Index i = begin + r;
            const Vector xi = features.row(i);
            std::size_t m = 0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) continue;
                cand[m++] = {sq(i) + sq(j) - 2.0 * static_cast<double>(cross(r, j)), static_cast<std::uint32_t>(j)};
            }
            const std::size_t take = std::min<std::size_t>(m, static_cast<std::size_t>(k) * 2 + 8);
            std::nth_element(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take - 1),
                             cand.begin() + static_cast<std::ptrdiff_t>(m));
            const double cutoff = cand[take - 1].first;
            const double slack = 1e-4 * (sq(i) + max_sq) + 1e-12;
            exact.clear();
            for (std::size_t c = 0; c < m; ++c) {
                if (cand[c].first <= cutoff + slack) {
                    const auto j = static_cast<Eigen::Index>(cand[c].second);
                    exact.emplace_back((xi - features.row(j)).squaredNorm(), cand[c].second);
                }
            }
            std::partial_sort(exact.begin(), exact.begin() + k, exact.end());
            for (int c = 0; c < k; ++c) {
                out.neighbor_ids(i, c) = exact[static_cast<std::size_t>(c)].second;
                out.distances(i, c) = std::sqrt(exact[static_cast<std::size_t>(c)].first);
            }
        }
    }
    return out;
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::string& in, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
    return v;
}

}  // namespace

void save_knn(const NeighborIndex& index, const std::filesystem::path& path) {
    std::string out = "VGSN";
    put_u32(out, static_cast<std::uint32_t>(index.rows()));
    put_u32(out, static_cast<std::uint32_t>(index.k));
    for (Eigen::Index i = 0; i < index.neighbor_ids.size(); ++i) put_u32(out, index.neighbor_ids.data()[i]);
    for (Eigen::Index i = 0; i < index.distances.size(); ++i) {
        put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(index.distances.data()[i])));
    }
    write_file(path, out);
}

NeighborIndex load_knn(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "VGSN", 4) != 0) {
        throw InputError(path.string() + ": not a VGSN neighbour file");
    }
    const std::uint32_t n = get_u32(bytes, 4);
    const std::uint32_t k = get_u32(bytes, 8);
    const std::size_t count = static_cast<std::size_t>(n) * k;
    if (bytes.size() != 12 + count * 8) {
        throw InputError(path.string() + ": expected " + std::to_string(12 + count * 8) + " bytes, found " +
                         std::to_string(bytes.size()));
    }
    NeighborIndex out;
    out.k = static_cast<int>(k);
    out.neighbor_ids.resize(n, k);
    out.distances.resize(n, k);
    for (std::size_t i = 0; i < count; ++i) {
        const auto id = get_u32(bytes, 12 + 4 * i);
        if (id >= n) throw InputError(path.string() + ": neighbour id " + std::to_string(id) + " out of range");
        out.neighbor_ids.data()[i] = id;
        out.distances.data()[i] = std::bit_cast<float>(get_u32(bytes, 12 + 4 * count + 4 * i));
    }
    return out;
}

}  // namespace vgse::knn
