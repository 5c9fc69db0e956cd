#include "vgse/pc_trainer.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>

#include "vgse/checksum.hpp"
#include "vgse/error.hpp"

namespace vgse::pc {

ClusterHeadParams ClusterHeadParams::zeros_like(const ClusterHeadParams& s) {
    ClusterHeadParams z;
    z.w_h = Matrix::Zero(s.w_h.rows(), s.w_h.cols());
    z.b_h = Vector::Zero(s.b_h.size());
    z.w_q = Matrix::Zero(s.w_q.rows(), s.w_q.cols());
    z.b_q = Vector::Zero(s.b_q.size());
    z.w_s = Matrix::Zero(s.w_s.rows(), s.w_s.cols());
    z.b_s = Vector::Zero(s.b_s.size());
    z.lambda = s.lambda;
    z.beta = s.beta;
    z.gamma = s.gamma;
    return z;
}

bool ClusterHeadParams::operator==(const ClusterHeadParams& o) const {
    auto same = [](const auto& a, const auto& b) {
        return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
    };
    return same(w_h, o.w_h) && same(b_h, o.b_h) && same(w_q, o.w_q) && same(b_q, o.b_q) && same(w_s, o.w_s) &&
           same(b_s, o.b_s) && lambda == o.lambda && beta == o.beta && gamma == o.gamma;
}

void TrainConfig::validate() const {
    if (clusters < 2) throw InputError("cluster count must be >= 2");
    if (lambda < 0 || beta < 0 || gamma < 0) throw InputError("loss weights must be non-negative");
    if (!(learning_rate > 0)) throw InputError("learning rate must be positive");
    if (batch_size < 1) throw InputError("batch size must be >= 1");
    if (epochs < 0) throw InputError("epochs must be >= 0");
    if (neighbor_k < 1) throw InputError("neighbor k must be >= 1");
}

ClusterHeadParams init_params(int feature_dim, int clusters, int seen_count, int word_dim, Rng& rng) {
    auto fill = [&](Eigen::Index rows, Eigen::Index cols) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
        Matrix m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
        return m;
    };
    ClusterHeadParams p;
    p.w_h = fill(feature_dim, clusters);
    p.b_h = Vector::Zero(clusters);
    p.w_q = fill(clusters, seen_count);
    p.b_q = Vector::Zero(seen_count);
    p.w_s = fill(clusters, word_dim);
    p.b_s = Vector::Zero(word_dim);
    return p;
}

Vector softmax(const Vector& logits) {
    Vector e = (logits.array() - logits.maxCoeff()).exp();
    return e / e.sum();
}

namespace {

void check_feature(const ClusterHeadParams& p, Eigen::Index dim) {
    if (dim != p.feature_dim()) {
        throw InputError("feature dim " + std::to_string(dim) + " does not match head input dim " +
                         std::to_string(p.feature_dim()));
    }
}

Matrix softmax_rows(Matrix z) {
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        auto row = z.row(r);
        row.array() -= row.maxCoeff();
        row = row.array().exp().matrix();
        row /= row.sum();
    }
    return z;
}

double clamped_log(double v) { return std::log(std::max(v, kLogEps)); }

// d(-log max(v, eps))/dv
double neg_log_slope(double v) { return v > kLogEps ? -1.0 / v : 0.0; }

double logsumexp(const Eigen::Ref<const Vector>& u) {
    const double m = u.maxCoeff();
    return m + std::log((u.array() - m).exp().sum());
}

}  // namespace

ClusterAssignment forward_cluster(const ClusterHeadParams& params, const Vector& feature) {
    check_feature(params, feature.size());
    return {softmax(params.w_h.transpose() * feature + params.b_h)};
}

Matrix forward_cluster_rows(const ClusterHeadParams& params, const Matrix& features) {
    check_feature(params, features.cols());
    Matrix z = features * params.w_h;
    z.rowwise() += params.b_h.transpose();
    return softmax_rows(std::move(z));
}

double loss_clu(const ClusterAssignment& anchor, const ClusterAssignment& neighbor) {
    if (anchor.size() != neighbor.size()) throw InputError("loss_clu: assignment sizes differ");
    return -clamped_log(anchor.probs.dot(neighbor.probs));
}

double mean_entropy_penalty(const Vector& mean) {
    double total = 0.0;
    for (Eigen::Index k = 0; k < mean.size(); ++k) {
        if (mean(k) > 0.0) total += mean(k) * clamped_log(mean(k));
    }
    return total;
}

double loss_pel(std::span<const ClusterAssignment> batch) {
    if (batch.empty()) throw InputError("loss_pel: empty batch");
    Vector mean = Vector::Zero(batch.front().size());
    for (const auto& a : batch) mean += a.probs;
    mean /= static_cast<double>(batch.size());
    return mean_entropy_penalty(mean);
}

double loss_cls_logits(const Vector& logits, int label) {
    if (label < 0 || label >= logits.size()) throw InputError("loss_cls: label is not a seen class index");
    return logsumexp(logits) - logits(label);
}

double loss_cls(const ClusterHeadParams& params, const ClusterAssignment& assignment, int label) {
    return loss_cls_logits(params.w_q.transpose() * assignment.probs + params.b_q, label);
}

double loss_sem(const ClusterHeadParams& params, const ClusterAssignment& assignment, const Vector& word) {
    if (word.size() != params.word_dim()) throw InputError("loss_sem: word embedding dim mismatch");
    return (params.w_s.transpose() * assignment.probs + params.b_s - word).norm();
}

namespace {

void check_batch(const ClusterHeadParams& p, const Batch& b) {
    if (b.anchors.rows() == 0) throw InputError("empty batch");
    if (b.neighbors.rows() != b.anchors.rows() || b.labels.size() != static_cast<std::size_t>(b.anchors.rows())) {
        throw InputError("batch anchors, neighbours and labels disagree in size");
    }
    if (b.words == nullptr || b.words->rows() != p.seen_count() || b.words->cols() != p.word_dim()) {
        throw InputError("batch word matrix does not match the heads");
    }
    for (int y : b.labels) {
        if (y < 0 || y >= p.seen_count()) throw InputError("label " + std::to_string(y) + " is not a seen class index");
    }
}

LossBreakdown evaluate(const ClusterHeadParams& p, const Batch& b, const LossWeights& w, ClusterHeadParams* grad) {
    check_batch(p, b);
    const Eigen::Index n = b.anchors.rows();
    const double inv_n = 1.0 / static_cast<double>(n);

    const Matrix a = forward_cluster_rows(p, b.anchors);
    const Matrix an = forward_cluster_rows(p, b.neighbors);

    Matrix cls_logits = a * p.w_q;
    cls_logits.rowwise() += p.b_q.transpose();
    Matrix sem_resid = a * p.w_s;
    sem_resid.rowwise() += p.b_s.transpose();
    for (Eigen::Index i = 0; i < n; ++i) sem_resid.row(i) -= b.words->row(b.labels[static_cast<std::size_t>(i)]);

    LossBreakdown out;
    Vector dots(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        dots(i) = a.row(i).dot(an.row(i));
        out.clu -= clamped_log(dots(i));
        out.cls += logsumexp(cls_logits.row(i).transpose()) - cls_logits(i, b.labels[static_cast<std::size_t>(i)]);
        out.sem += sem_resid.row(i).norm();
    }
    out.clu *= inv_n;
    out.cls *= inv_n;
    out.sem *= inv_n;
    const Vector mean = a.colwise().mean().transpose();
    out.pel = mean_entropy_penalty(mean);
    out.total = w.clu * out.clu + w.pel * out.pel + w.cls * out.cls + w.sem * out.sem;
    if (grad == nullptr) return out;

    *grad = ClusterHeadParams::zeros_like(p);
    Matrix da = Matrix::Zero(n, a.cols());
    Matrix dan = Matrix::Zero(n, a.cols());

    if (w.clu != 0.0) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double s = w.clu * inv_n * neg_log_slope(dots(i));
            da.row(i) += s * an.row(i);
            dan.row(i) += s * a.row(i);
        }
    }
    if (w.pel != 0.0) {
        Vector dmean(mean.size());
        for (Eigen::Index k = 0; k < mean.size(); ++k) {
            dmean(k) = mean(k) > kLogEps ? std::log(mean(k)) + 1.0 : std::log(kLogEps);
        }
        da.rowwise() += (w.pel * inv_n * dmean).transpose();
    }
    if (w.cls != 0.0) {
        Matrix du(n, cls_logits.cols());
        for (Eigen::Index i = 0; i < n; ++i) {
            du.row(i) = softmax(cls_logits.row(i).transpose()).transpose();
            du(i, b.labels[static_cast<std::size_t>(i)]) -= 1.0;
        }
        du *= w.cls * inv_n;
        grad->w_q = a.transpose() * du;
        grad->b_q = du.colwise().sum().transpose();
        da += du * p.w_q.transpose();
    }
    if (w.sem != 0.0) {
        Matrix dr = Matrix::Zero(n, sem_resid.cols());
        for (Eigen::Index i = 0; i < n; ++i) {
            const double norm = sem_resid.row(i).norm();
            if (norm > 0.0) dr.row(i) = sem_resid.row(i) / norm;
        }
        dr *= w.sem * inv_n;
        grad->w_s = a.transpose() * dr;
        grad->b_s = dr.colwise().sum().transpose();
        da += dr * p.w_s.transpose();
    }

    // Back through the softmax: dz = a * (da - <a, da>).
    auto softmax_back = [](const Matrix& probs, const Matrix& dprobs) {
        Matrix dz = dprobs;
        for (Eigen::Index i = 0; i < probs.rows(); ++i) {
            const double inner = probs.row(i).dot(dprobs.row(i));
            dz.row(i) = probs.row(i).array() * (dprobs.row(i).array() - inner);
        }
        return dz;
    };
    const Matrix dz = softmax_back(a, da);
    const Matrix dzn = softmax_back(an, dan);
    grad->w_h = b.anchors.transpose() * dz + b.neighbors.transpose() * dzn;
    grad->b_h = (dz.colwise().sum() + dzn.colwise().sum()).transpose();
    return out;
}

}  // namespace

LossBreakdown total_loss(const ClusterHeadParams& params, const Batch& batch, const LossWeights& weights) {
    return evaluate(params, batch, weights, nullptr);
}

LossBreakdown loss_and_gradient(const ClusterHeadParams& params, const Batch& batch, const LossWeights& weights,
                                ClusterHeadParams& grad) {
    return evaluate(params, batch, weights, &grad);
}

Vector flatten(const ClusterHeadParams& p) {
    Vector flat(p.w_h.size() + p.b_h.size() + p.w_q.size() + p.b_q.size() + p.w_s.size() + p.b_s.size());
    Eigen::Index at = 0;
    auto put = [&](const auto& m) {
        flat.segment(at, m.size()) = Eigen::Map<const Vector>(m.data(), m.size());
        at += m.size();
    };
    put(p.w_h);
    put(p.b_h);
    put(p.w_q);
    put(p.b_q);
    put(p.w_s);
    put(p.b_s);
    return flat;
}

void unflatten(const Vector& flat, ClusterHeadParams& p) {
    Eigen::Index at = 0;
    auto take = [&](auto& m) {
        Eigen::Map<Vector>(m.data(), m.size()) = flat.segment(at, m.size());
        at += m.size();
    };
    take(p.w_h);
    take(p.b_h);
    take(p.w_q);
    take(p.b_q);
    take(p.w_s);
    take(p.b_s);
}

TrainResult train_pc(const FeatureMatrix& features, const std::vector<int>& labels, const Matrix& seen_words,
                     const knn::NeighborIndex& knn, const TrainConfig& config) {
    config.validate();
    const Eigen::Index n = features.rows();
    if (n == 0) throw InputError("train_pc: empty training split");
    if (labels.size() != static_cast<std::size_t>(n)) throw InputError("train_pc: one label per feature row required");
    if (knn.rows() != n) throw InputError("train_pc: neighbour index does not match the training rows");
    if (seen_words.rows() == 0) throw InputError("train_pc: no seen classes");

    TrainResult result;
    if (config.clusters > n) {
        result.warnings.push_back("cluster count " + std::to_string(config.clusters) + " exceeds training rows " +
                                  std::to_string(n));
    }
    Rng root(config.seed);
    Rng init_rng = root.fork(1);
    Rng order_rng = root.fork(2);
    result.params = init_params(static_cast<int>(features.dim()), config.clusters,
                                static_cast<int>(seen_words.rows()), static_cast<int>(seen_words.cols()), init_rng);
    result.params.lambda = config.lambda;
    result.params.beta = config.beta;
    result.params.gamma = config.gamma;

    const auto weights = LossWeights::from(config);
    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kAdamEps = 1e-8;
    Vector theta = flatten(result.params);
    Vector m1 = Vector::Zero(theta.size());
    Vector m2 = Vector::Zero(theta.size());
    long step = 0;

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    ClusterHeadParams grad;
    Batch batch;
    batch.words = &seen_words;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        order_rng.shuffle(order);
        double loss_sum = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            const auto bn = static_cast<Eigen::Index>(stop - start);
            batch.anchors.resize(bn, features.dim());
            batch.neighbors.resize(bn, features.dim());
            batch.labels.resize(static_cast<std::size_t>(bn));
            for (Eigen::Index r = 0; r < bn; ++r) {
                const Eigen::Index i = order[start + static_cast<std::size_t>(r)];
                const auto pick = static_cast<Eigen::Index>(order_rng.index(static_cast<std::size_t>(knn.k)));
                batch.anchors.row(r) = features.values.row(i).cast<double>();
                batch.neighbors.row(r) = features.values.row(knn.neighbor_ids(i, pick)).cast<double>();
                batch.labels[static_cast<std::size_t>(r)] = labels[static_cast<std::size_t>(i)];
            }
            const auto loss = loss_and_gradient(result.params, batch, weights, grad);
            loss_sum += loss.total;
            ++batches;

            ++step;
            const Vector g = flatten(grad);
            m1 = kBeta1 * m1 + (1.0 - kBeta1) * g;
            m2 = kBeta2 * m2 + (1.0 - kBeta2) * g.cwiseAbs2();
            const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
            theta.array() -= config.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + kAdamEps);
            unflatten(theta, result.params);
        }
        result.epoch_loss.push_back(loss_sum / batches);
    }

    Vector mean = Vector::Zero(config.clusters);
    constexpr Eigen::Index kChunk = 4096;
    for (Eigen::Index start = 0; start < n; start += kChunk) {
        const Eigen::Index len = std::min(kChunk, n - start);
        mean += forward_cluster_rows(result.params, features.values.middleRows(start, len).cast<double>())
                    .colwise()
                    .sum()
                    .transpose();
    }
    result.dataset_pel = mean_entropy_penalty(mean / static_cast<double>(n));
    return result;
}

namespace {

constexpr std::uint8_t kParamsVersion = 0x01;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(const std::string& in, std::size_t at, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
    return v;
}

}  // namespace

void save_params(const ClusterHeadParams& p, const std::filesystem::path& path) {
    std::string out = "VGSP";
    out.push_back(static_cast<char>(kParamsVersion));
    put_u32(out, static_cast<std::uint32_t>(p.feature_dim()));
    put_u32(out, static_cast<std::uint32_t>(p.cluster_count()));
    put_u32(out, static_cast<std::uint32_t>(p.seen_count()));
    put_u32(out, static_cast<std::uint32_t>(p.word_dim()));
    put_f64(out, p.lambda);
    put_f64(out, p.beta);
    put_f64(out, p.gamma);
    const Vector flat = flatten(p);
    for (Eigen::Index i = 0; i < flat.size(); ++i) put_f64(out, flat(i));
    write_file(path, out);
}

ClusterHeadParams load_params(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    constexpr std::size_t header = 4 + 1 + 16 + 24;
    if (bytes.size() < header || std::memcmp(bytes.data(), "VGSP", 4) != 0) {
        throw InputError(path.string() + ": not a VGSP parameter file");
    }
    if (static_cast<std::uint8_t>(bytes[4]) != kParamsVersion) throw InputError(path.string() + ": unsupported version");
    const auto d_f = static_cast<Eigen::Index>(get_le(bytes, 5, 4));
    const auto d_v = static_cast<Eigen::Index>(get_le(bytes, 9, 4));
    const auto n_seen = static_cast<Eigen::Index>(get_le(bytes, 13, 4));
    const auto d_w = static_cast<Eigen::Index>(get_le(bytes, 17, 4));
    ClusterHeadParams p;
    p.w_h.resize(d_f, d_v);
    p.b_h.resize(d_v);
    p.w_q.resize(d_v, n_seen);
    p.b_q.resize(n_seen);
    p.w_s.resize(d_v, d_w);
    p.b_s.resize(d_w);
    p.lambda = std::bit_cast<double>(get_le(bytes, 21, 8));
    p.beta = std::bit_cast<double>(get_le(bytes, 29, 8));
    p.gamma = std::bit_cast<double>(get_le(bytes, 37, 8));
    const std::size_t count = static_cast<std::size_t>(d_f * d_v + d_v + d_v * n_seen + n_seen + d_v * d_w + d_w);
    if (bytes.size() != header + 8 * count) {
        throw InputError(path.string() + ": expected " + std::to_string(header + 8 * count) + " bytes, found " +
                         std::to_string(bytes.size()));
    }
    Vector flat(static_cast<Eigen::Index>(count));
    for (std::size_t i = 0; i < count; ++i) flat(static_cast<Eigen::Index>(i)) = std::bit_cast<double>(get_le(bytes, header + 8 * i, 8));
    if (!flat.allFinite()) throw InputError(path.string() + ": non-finite parameter");
    unflatten(flat, p);
    return p;
}

}  // namespace vgse::pc
