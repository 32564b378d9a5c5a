#pragma once

// Independent oracles for the test suites. Everything here is written
// straight from the defining formulas with plain loops and must stay
// independent of the library's tensor/objective implementations.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "gcl/graph.hpp"
#include "gcl/tensor.hpp"

namespace oracle {

// --- dense propagation -------------------------------------------------------

// Explicitly formed D_hat^{-1/2} (A+I) D_hat^{-1/2} from the raw edge set.
inline Eigen::MatrixXd dense_sym_norm(const gcl::Graph& g) {
    const int n = g.n_nodes;
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
    for (auto [i, j] : g.undirected_edges()) {
        a(i, j) = 1.0;
        a(j, i) = 1.0;
    }
    Eigen::VectorXd dinv(n);
    for (int i = 0; i < n; ++i) dinv(i) = 1.0 / std::sqrt(a.row(i).sum());
    return dinv.asDiagonal() * a * dinv.asDiagonal();
}

inline Eigen::MatrixXd dense_mean_agg(const gcl::Graph& g) {
    const int n = g.n_nodes;
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
    for (auto [i, j] : g.undirected_edges()) {
        a(i, j) = 1.0;
        a(j, i) = 1.0;
    }
    for (int i = 0; i < n; ++i) a.row(i) /= a.row(i).sum();
    return a;
}

inline Eigen::MatrixXd dense_propagate(const Eigen::MatrixXd& p, Eigen::MatrixXd h, int steps) {
    for (int t = 0; t < steps; ++t) h = p * h;
    return h;
}

// --- scalar re-evaluation of the contrastive objectives ----------------------

struct ProjOracle {
    Eigen::MatrixXd w1, w2;
    Eigen::RowVectorXd b1, b2;

    Eigen::VectorXd operator()(const Eigen::VectorXd& h) const {
        Eigen::RowVectorXd z = h.transpose() * w1 + b1;
        for (Eigen::Index i = 0; i < z.size(); ++i)
            z(i) = z(i) > 0.0 ? z(i) : std::expm1(z(i));
        return (z * w2 + b2).transpose();
    }
};

inline double cos_sim(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double na = a.norm(), nb = b.norm();
    if (na <= 0.0 || nb <= 0.0) return 0.0;
    return a.dot(b) / (na * nb);
}

struct MixSpecOracle {
    int p, q;
    double alpha;
};

// One anchor's per-pair loss term; direction is fixed by argument order:
// anchors come from `au`, positives/inter-view negatives from `av`,
// intra-view negatives from `au`. Weights may be empty (all ones).
// Synthetics, when given, mix rows of `av` before projection.
inline double oracle_pair_loss(const Eigen::MatrixXd& au, const Eigen::MatrixXd& av, int i,
                               const ProjOracle& proj, double tau,
                               const Eigen::MatrixXd* weights,
                               const std::vector<MixSpecOracle>* synth) {
    const int n = static_cast<int>(au.rows());
    auto theta = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
        return cos_sim(proj(x), proj(y));
    };
    const double pos = std::exp(theta(au.row(i), av.row(i)) / tau);
    double denom = pos;
    for (int k = 0; k < n; ++k) {
        if (k == i) continue;
        const double w = weights ? (*weights)(i, k) : 1.0;
        denom += w * std::exp(theta(au.row(i), av.row(k)) / tau);
        denom += w * std::exp(theta(au.row(i), au.row(k)) / tau);
    }
    if (synth) {
        for (const auto& s : *synth) {
            const Eigen::VectorXd mixed =
                s.alpha * av.row(s.p).transpose() + (1.0 - s.alpha) * av.row(s.q).transpose();
            denom += std::exp(theta(au.row(i), mixed) / tau);
        }
    }
    return std::log(pos / denom);
}

inline double oracle_loss_infonce(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
                                  const ProjOracle& proj, double tau) {
    const int n = static_cast<int>(u.rows());
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        acc += oracle_pair_loss(u, v, i, proj, tau, nullptr, nullptr);
        acc += oracle_pair_loss(v, u, i, proj, tau, nullptr, nullptr);
    }
    return -acc / (2.0 * n);
}

inline double oracle_loss_weighted(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
                                   const ProjOracle& proj, double tau,
                                   const Eigen::MatrixXd& w_uv, const Eigen::MatrixXd& w_vu) {
    const int n = static_cast<int>(u.rows());
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        acc += oracle_pair_loss(u, v, i, proj, tau, &w_uv, nullptr);
        acc += oracle_pair_loss(v, u, i, proj, tau, &w_vu, nullptr);
    }
    return -acc / (2.0 * n);
}

inline double oracle_loss_mix(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
                              const ProjOracle& proj, double tau,
                              const std::vector<std::vector<MixSpecOracle>>& synth_uv,
                              const std::vector<std::vector<MixSpecOracle>>& synth_vu) {
    const int n = static_cast<int>(u.rows());
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        acc += oracle_pair_loss(u, v, i, proj, tau, nullptr,
                                &synth_uv[static_cast<std::size_t>(i)]);
        acc += oracle_pair_loss(v, u, i, proj, tau, nullptr,
                                &synth_vu[static_cast<std::size_t>(i)]);
    }
    return -acc / (2.0 * n);
}

// --- finite differences ------------------------------------------------------

// Central finite differences over every entry of every parameter, compared
// against the analytic gradients produced by one backward() call.
inline double fd_max_rel_error(const std::vector<gcl::TensorPtr>& params,
                               const std::function<gcl::TensorPtr()>& forward,
                               double h = 1e-5) {
    gcl::TensorPtr loss = forward();
    gcl::backward(loss);
    std::vector<Eigen::MatrixXd> analytic;
    analytic.reserve(params.size());
    for (const auto& p : params)
        analytic.push_back(p->grad.size() != 0
                               ? p->grad
                               : Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    double max_rel = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& p = *params[k];
        for (int i = 0; i < p.rows(); ++i) {
            for (int j = 0; j < p.cols(); ++j) {
                const double orig = p.val(i, j);
                p.val(i, j) = orig + h;
                const double fp = forward()->scalar();
                p.val(i, j) = orig - h;
                const double fm = forward()->scalar();
                p.val(i, j) = orig;
                const double fd = (fp - fm) / (2.0 * h);
                const double a = analytic[k](i, j);
                const double denom = std::max({std::abs(a), std::abs(fd), 1e-6});
                max_rel = std::max(max_rel, std::abs(a - fd) / denom);
            }
        }
    }
    return max_rel;
}

// --- synthetic draws ----------------------------------------------------------

inline double draw_beta(std::mt19937_64& eng, double alpha, double beta) {
    std::gamma_distribution<double> ga(alpha, 1.0), gb(beta, 1.0);
    const double x = ga(eng), y = gb(eng);
    return x / (x + y);
}

// lambda0 * Beta(a0,b0) + (1-lambda0) * Beta(a1,b1)
inline std::vector<double> draw_beta_mixture(std::mt19937_64& eng, std::size_t count,
                                             double lambda0, double a0, double b0, double a1,
                                             double b1) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        out.push_back(unif(eng) < lambda0 ? draw_beta(eng, a0, b0) : draw_beta(eng, a1, b1));
    return out;
}

// --- quadrature ----------------------------------------------------------------

inline double midpoint_integral(const std::function<double(double)>& f, double lo, double hi,
                                int points) {
    const double w = (hi - lo) / points;
    double acc = 0.0;
    for (int i = 0; i < points; ++i) acc += f(lo + (i + 0.5) * w);
    return acc * w;
}

// --- random instances -----------------------------------------------------------

inline Eigen::MatrixXd random_matrix(std::mt19937_64& eng, int rows, int cols, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = nd(eng);
    return m;
}

// Random connected graph on n nodes: a random spanning tree plus extra edges.
inline std::vector<std::pair<int, int>> random_connected_edges(std::mt19937_64& eng, int n,
                                                               double extra_edge_prob) {
    std::vector<std::pair<int, int>> edges;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int v = 1; v < n; ++v) {
        std::uniform_int_distribution<int> pick(0, v - 1);
        edges.emplace_back(pick(eng), v);
    }
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (unif(eng) < extra_edge_prob) edges.emplace_back(i, j);
    return edges;
}

}  // namespace oracle
