#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "vgse/pc_trainer.hpp"
#include "vgse/rng.hpp"

namespace vgse::test {

// A random (params, batch) draw with D_f <= 32 and D_v <= 16.
struct GradProblem {
    pc::ClusterHeadParams params;
    Matrix words;
    pc::Batch batch;
};

inline GradProblem random_grad_problem(std::uint64_t seed) {
    Rng rng(seed);
    const int d_f = 2 + static_cast<int>(rng.index(31));
    const int d_v = 2 + static_cast<int>(rng.index(15));
    const int n_seen = 1 + static_cast<int>(rng.index(6));
    const int d_w = 1 + static_cast<int>(rng.index(5));
    const int n = 1 + static_cast<int>(rng.index(8));
    GradProblem g;
    g.params = pc::init_params(d_f, d_v, n_seen, d_w, rng);
    // Scale up so that assignments are far from uniform.
    g.params.w_h *= 3.0;
    for (Vector* b : {&g.params.b_h, &g.params.b_q, &g.params.b_s}) {
        for (Eigen::Index i = 0; i < b->size(); ++i) (*b)(i) = rng.normal(0.0, 0.5);
    }
    auto gaussian = [&](Eigen::Index r, Eigen::Index c) {
        Matrix m(r, c);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
        return m;
    };
    g.words = gaussian(n_seen, d_w);
    g.batch.anchors = gaussian(n, d_f);
    g.batch.neighbors = g.batch.anchors + 0.5 * gaussian(n, d_f);
    for (int i = 0; i < n; ++i) g.batch.labels.push_back(static_cast<int>(rng.index(static_cast<std::size_t>(n_seen))));
    return g;
}

// ||analytic - numeric|| / max(||analytic||, ||numeric||), numeric from
// central differences of step h.
inline double gradient_relative_error(const GradProblem& g, const pc::LossWeights& w, double h = 1e-5) {
    pc::Batch batch = g.batch;
    batch.words = &g.words;
    pc::ClusterHeadParams grad;
    pc::loss_and_gradient(g.params, batch, w, grad);
    const Vector analytic = pc::flatten(grad);
    Vector theta = pc::flatten(g.params);
    pc::ClusterHeadParams probe = g.params;
    Vector numeric(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        const double keep = theta(i);
        theta(i) = keep + h;
        pc::unflatten(theta, probe);
        const double up = pc::total_loss(probe, batch, w).total;
        theta(i) = keep - h;
        pc::unflatten(theta, probe);
        const double down = pc::total_loss(probe, batch, w).total;
        theta(i) = keep;
        numeric(i) = (up - down) / (2.0 * h);
    }
    const double scale = std::max({analytic.norm(), numeric.norm(), 1e-300});
    return (analytic - numeric).norm() / scale;
}

struct NamedWeights {
    std::string name;
    pc::LossWeights weights;
};

inline std::vector<NamedWeights> loss_terms() {
    return {{"clu", {1, 0, 0, 0}},
            {"pel", {0, 1, 0, 0}},
            {"cls", {0, 0, 1, 0}},
            {"sem", {0, 0, 0, 1}},
            {"total", {1, 5, 1, 1}}};
}

}  // namespace vgse::test
