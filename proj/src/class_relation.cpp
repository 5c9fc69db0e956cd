#include "vgse/class_relation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>

#include <Eigen/QR>
#include <json.hpp>

#include "vgse/checksum.hpp"
#include "vgse/error.hpp"

namespace vgse::relation {

const char* to_string(Mode mode) { return mode == Mode::wavg ? "wavg" : "smo"; }

Mode parse_mode(const std::string& text) {
    if (text == "wavg") return Mode::wavg;
    if (text == "smo") return Mode::smo;
    throw InputError("unknown relation mode '" + text + "' (expected wavg|smo)");
}

void CRConfig::validate(int n_seen) const {
    if (!(eta > 0)) throw InputError("eta must be positive");
    if (n_neighbors < 1) throw InputError("n_neighbors must be >= 1");
    if (mode == Mode::wavg && n_neighbors > n_seen) {
        throw InputError("n_neighbors=" + std::to_string(n_neighbors) + " exceeds the " + std::to_string(n_seen) +
                         " seen classes");
    }
    if (!(alpha < 1.0)) throw InputError("alpha must be < 1");
    if (n_seen * alpha > 1.0) throw InputError("alpha too large: no feasible weights sum to 1");
    if (!(tol > 0)) throw InputError("solver tolerance must be positive");
    if (max_iter < 1) throw InputError("max_iter must be >= 1");
}

double similarity(const Vector& unseen_word, const Vector& seen_word, double eta) {
    if (unseen_word.size() != seen_word.size()) throw InputError("similarity: word dims differ");
    return std::exp(-eta * (unseen_word - seen_word).norm());
}

std::vector<std::size_t> nearest_seen(const Vector& unseen_word, const SeenClasses& seen, int n) {
    if (n > static_cast<int>(seen.ids.size())) {
        throw InputError("asked for " + std::to_string(n) + " neighbours among " + std::to_string(seen.ids.size()) +
                         " seen classes");
    }
    std::vector<std::size_t> order(seen.ids.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> dist(seen.ids.size());
    for (std::size_t i = 0; i < order.size(); ++i) dist[i] = (seen.words.row(static_cast<Eigen::Index>(i)).transpose() - unseen_word).norm();
    std::partial_sort(order.begin(), order.begin() + n, order.end(), [&](std::size_t a, std::size_t b) {
        return dist[a] != dist[b] ? dist[a] < dist[b] : seen.ids[a] < seen.ids[b];
    });
    order.resize(static_cast<std::size_t>(n));
    return order;
}

Vector wavg_predict(const Vector& unseen_word, const SeenClasses& seen, const CRConfig& config) {
    const auto nb = nearest_seen(unseen_word, seen, config.n_neighbors);
    Vector out = Vector::Zero(seen.rows.cols());
    for (std::size_t i : nb) {
        const auto row = static_cast<Eigen::Index>(i);
        out += similarity(unseen_word, seen.words.row(row).transpose(), config.eta) * seen.rows.row(row).transpose();
    }
    return out / static_cast<double>(nb.size());
}

Vector project_capped_simplex(const Vector& v, double lo, double hi) {
    const auto n = v.size();
    if (n == 0) throw InputError("projection of an empty vector");
    if (n * lo > 1.0 || n * hi < 1.0) throw InputError("capped simplex is empty");
    auto clipped_sum = [&](double tau) { return (v.array() - tau).max(lo).min(hi).sum(); };
    // clipped_sum is non-increasing in tau: all at hi below lo_tau, all at lo above hi_tau.
    double tau_lo = v.minCoeff() - hi;
    double tau_hi = v.maxCoeff() - lo;
    for (int it = 0; it < 200 && tau_hi - tau_lo > 0.0; ++it) {
        const double mid = 0.5 * (tau_lo + tau_hi);
        if (mid <= tau_lo || mid >= tau_hi) break;
        if (clipped_sum(mid) > 1.0) tau_lo = mid;
        else tau_hi = mid;
    }
    // Solve exactly for the shift on the free set found by bisection.
    double tau = 0.5 * (tau_lo + tau_hi);
    double fixed = 0.0;
    double free_sum = 0.0;
    int n_free = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = v(i) - tau;
        if (x <= lo) fixed += lo;
        else if (x >= hi) fixed += hi;
        else {
            free_sum += v(i);
            ++n_free;
        }
    }
    if (n_free > 0) tau = (free_sum + fixed - 1.0) / n_free;
    return (v.array() - tau).max(lo).min(hi).matrix();
}

namespace {

constexpr int kPolishEvery = 25;

// Minimiser of the quadratic on the face where r's bound-active coordinates
// stay fixed, or nothing when that point leaves the box.
std::optional<Vector> polish_on_face(const Matrix& gram, const Vector& lin, const Vector& r, double lo) {
    constexpr double kHi = 1.0;
    constexpr double kSlack = 1e-10;
    const auto n = r.size();
    std::vector<Eigen::Index> free;
    Vector out = r;
    double fixed_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (r(i) <= lo + kSlack) out(i) = lo;
        else if (r(i) >= kHi - kSlack) out(i) = kHi;
        else {
            free.push_back(i);
            continue;
        }
        fixed_sum += out(i);
    }
    const auto f = static_cast<Eigen::Index>(free.size());
    if (f == 0) return std::abs(fixed_sum - 1.0) <= 1e-12 ? std::optional<Vector>(out) : std::nullopt;
    for (Eigen::Index i : free) out(i) = 0.0;
    Matrix K = Matrix::Zero(f + 1, f + 1);
    Vector rhs(f + 1);
    for (Eigen::Index a = 0; a < f; ++a) {
        for (Eigen::Index b = 0; b < f; ++b) K(a, b) = gram(free[a], free[b]);
        K(a, f) = 1.0;
        K(f, a) = 1.0;
        rhs(a) = lin(free[a]) - gram.row(free[a]).dot(out);
    }
    rhs(f) = 1.0 - fixed_sum;
    const Vector sol = K.completeOrthogonalDecomposition().solve(rhs);
    for (Eigen::Index a = 0; a < f; ++a) {
        if (sol(a) < lo || sol(a) > kHi) return std::nullopt;
        out(free[a]) = sol(a);
    }
    return out;
}

}  // namespace

RelationWeights smo_solve(const Matrix& seen_words, const Vector& unseen_word, double alpha, double tol,
                          int max_iter) {
    const auto n = seen_words.rows();
    if (n < 1) throw InputError("smo_solve: no seen classes");
    if (seen_words.cols() != unseen_word.size()) throw InputError("smo_solve: word dims differ");
    if (!(alpha < 1.0) || n * alpha > 1.0) throw InputError("smo_solve: infeasible bounds");

    RelationWeights out;
    auto objective = [&](const Vector& r) { return (seen_words.transpose() * r - unseen_word).norm(); };
    if (n == 1) {
        out.r = Vector::Ones(1);
        out.residual = objective(out.r);
        return out;
    }

    const Matrix gram = seen_words * seen_words.transpose();
    const Vector lin = seen_words * unseen_word;
    const double lipschitz = std::max(seen_words.squaredNorm(), 1e-300);
    const double step = 1.0 / lipschitz;
    auto grad = [&](const Vector& r) -> Vector { return gram * r - lin; };
    auto sq_obj = [&](const Vector& r) { return 0.5 * r.dot(gram * r) - r.dot(lin); };

    auto kkt = [&](const Vector& r) {
        return (r - project_capped_simplex(r - step * grad(r), alpha)).norm() * lipschitz;
    };

    Vector r = project_capped_simplex(Vector::Constant(n, 1.0 / static_cast<double>(n)), alpha);
    Vector y = r;
    double t = 1.0;
    double f_prev = sq_obj(r);
    out.converged = false;
    for (int it = 1; it <= max_iter; ++it) {
        const Vector r_next = project_capped_simplex(y - step * grad(y), alpha);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        const double f_next = sq_obj(r_next);
        out.iterations = it;
        if (f_next > f_prev) {
            // Function-value restart: drop momentum and take a plain step.
            t = 1.0;
            y = r;
            continue;
        }
        y = r_next + ((t - 1.0) / t_next) * (r_next - r);
        r = r_next;
        t = t_next;
        f_prev = f_next;

        out.kkt_residual = kkt(r);
        if (out.kkt_residual <= tol) {
            out.converged = true;
            break;
        }
        if (it % kPolishEvery == 0) {
            if (auto exact = polish_on_face(gram, lin, r, alpha); exact && sq_obj(*exact) <= f_prev) {
                const double k = kkt(*exact);
                if (k <= tol) {
                    r = *exact;
                    out.kkt_residual = k;
                    out.converged = true;
                    break;
                }
            }
        }
    }
    if (auto exact = polish_on_face(gram, lin, r, alpha); exact && sq_obj(*exact) <= sq_obj(r)) {
        const double k = kkt(*exact);
        if (k <= out.kkt_residual || k <= tol) {
            r = *exact;
            out.kkt_residual = k;
            out.converged = out.converged || k <= tol;
        }
    }
    out.r = r;
    out.residual = objective(r);
    return out;
}

Vector smo_predict(const RelationWeights& weights, const Matrix& seen_rows) {
    if (weights.r.size() != seen_rows.rows()) throw InputError("smo_predict: weight count does not match seen rows");
    return seen_rows.transpose() * weights.r;
}

namespace {

Matrix prepared_words(const Matrix& words, bool normalize) {
    if (!normalize) return words;
    Matrix out = words;
    out.rowwise().normalize();
    return out;
}

}  // namespace

Prediction predict_unseen(const embed::ClassEmbeddingTable& seen_table, const DatasetManifest& manifest,
                          const CRConfig& config) {
    SeenClasses seen;
    seen.ids = manifest.seen_classes();
    config.validate(static_cast<int>(seen.ids.size()));
    seen.words = prepared_words(manifest.word_matrix(seen.ids), config.normalize_words);
    seen.rows = seen_table.gather(seen.ids);

    const auto unseen = manifest.unseen_classes();
    const Matrix unseen_words = prepared_words(manifest.word_matrix(unseen), config.normalize_words);

    Prediction out;
    out.table = seen_table;
    std::vector<Vector> rows(unseen.size());
    if (config.mode == Mode::smo) out.relations.resize(unseen.size());
    const auto n_unseen = static_cast<std::ptrdiff_t>(unseen.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t u = 0; u < n_unseen; ++u) {
        const auto idx = static_cast<std::size_t>(u);
        const Vector w = unseen_words.row(u).transpose();
        if (config.mode == Mode::wavg) {
            rows[idx] = wavg_predict(w, seen, config);
        } else {
            auto rel = smo_solve(seen.words, w, config.alpha, config.tol, config.max_iter);
            rel.unseen_class = unseen[idx];
            rows[idx] = smo_predict(rel, seen.rows);
            out.relations[idx] = std::move(rel);
        }
    }
    for (std::size_t u = 0; u < unseen.size(); ++u) out.table.set(unseen[u], rows[u], embed::RowOrigin::predicted);
    return out;
}

void write_relations(const std::vector<RelationWeights>& relations, const std::filesystem::path& path) {
    std::ostringstream out;
    for (const auto& rel : relations) {
        nlohmann::json j;
        j["unseen_class"] = rel.unseen_class;
        j["r"] = std::vector<double>(rel.r.data(), rel.r.data() + rel.r.size());
        j["residual"] = rel.residual;
        j["kkt_residual"] = rel.kkt_residual;
        j["converged"] = rel.converged;
        out << j.dump() << '\n';
    }
    write_file(path, out.str());
}

}  // namespace vgse::relation
