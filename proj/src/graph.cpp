#include "gcl/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace gcl {

bool Graph::has_edge(int u, int v) const {
    const int* b = neighbors_begin(u);
    const int* e = neighbors_end(u);
    return std::binary_search(b, e, v);
}

std::vector<std::pair<int, int>> Graph::undirected_edges() const {
    std::vector<std::pair<int, int>> out;
    out.reserve(static_cast<std::size_t>(n_edges()));
    for (int i = 0; i < n_nodes; ++i)
        for (const int* p = neighbors_begin(i); p != neighbors_end(i); ++p)
            if (i < *p) out.emplace_back(i, *p);
    return out;
}

Graph build_graph(const std::vector<std::pair<int, int>>& edge_list,
                  Eigen::MatrixXd features,
                  std::optional<std::vector<int>> labels,
                  std::vector<std::string>* warnings) {
    const int n = static_cast<int>(features.rows());
    if (n <= 0) throw std::invalid_argument("build_graph: empty feature matrix");
    if (labels && static_cast<int>(labels->size()) != n)
        throw std::invalid_argument("build_graph: label count does not match node count");

    std::set<std::pair<int, int>> edges;
    int dropped_self_loops = 0;
    for (auto [a, b] : edge_list) {
        if (a < 0 || b < 0 || a >= n || b >= n)
            throw std::invalid_argument("build_graph: edge index out of range");
        if (a == b) {
            ++dropped_self_loops;
            continue;
        }
        edges.emplace(std::min(a, b), std::max(a, b));
    }
    if (dropped_self_loops > 0 && warnings)
        warnings->push_back("dropped " + std::to_string(dropped_self_loops) +
                            " explicit self-loop(s); normalization adds them implicitly");

    Graph g;
    g.n_nodes = n;
    g.features = std::move(features);
    g.labels = std::move(labels);
    g.degree.assign(static_cast<std::size_t>(n), 0);
    for (auto [a, b] : edges) {
        ++g.degree[static_cast<std::size_t>(a)];
        ++g.degree[static_cast<std::size_t>(b)];
    }
    g.offsets.assign(static_cast<std::size_t>(n) + 1, 0);
    for (int i = 0; i < n; ++i)
        g.offsets[static_cast<std::size_t>(i) + 1] =
            g.offsets[static_cast<std::size_t>(i)] + g.degree[static_cast<std::size_t>(i)];
    g.nbrs.assign(static_cast<std::size_t>(g.offsets.back()), 0);
    std::vector<int> cursor(g.offsets.begin(), g.offsets.end() - 1);
    for (auto [a, b] : edges) {
        g.nbrs[static_cast<std::size_t>(cursor[static_cast<std::size_t>(a)]++)] = b;
        g.nbrs[static_cast<std::size_t>(cursor[static_cast<std::size_t>(b)]++)] = a;
    }
    // set iteration is ordered, so each node's neighbor run is already sorted
    // for the first endpoint but not the second; sort per node to be safe.
    for (int i = 0; i < n; ++i)
        std::sort(g.nbrs.begin() + g.offsets[static_cast<std::size_t>(i)],
                  g.nbrs.begin() + g.offsets[static_cast<std::size_t>(i) + 1]);
    return g;
}

PropagationOperator make_operator(const Graph& g, PropagationKind kind) {
    PropagationOperator op;
    op.kind = kind;
    op.n = g.n_nodes;
    op.offsets = g.offsets;
    op.nbrs = g.nbrs;
    op.norm.resize(g.n_nodes);
    for (int i = 0; i < g.n_nodes; ++i) {
        const double dhat = static_cast<double>(g.degree[static_cast<std::size_t>(i)]) + 1.0;
        op.norm[i] = kind == PropagationKind::SymNormWithSelfLoops ? 1.0 / std::sqrt(dhat)
                                                                   : 1.0 / dhat;
    }
    return op;
}

Eigen::MatrixXd PropagationOperator::apply(const Eigen::MatrixXd& h) const {
    if (static_cast<int>(h.rows()) != n)
        throw std::invalid_argument("PropagationOperator::apply: row count mismatch");
    Eigen::MatrixXd out(h.rows(), h.cols());
    if (kind == PropagationKind::SymNormWithSelfLoops) {
        // y_i = norm_i * (norm_i * x_i + sum_j norm_j * x_j)
        Eigen::MatrixXd scaled = norm.asDiagonal() * h;
        for (int i = 0; i < n; ++i) {
            Eigen::RowVectorXd acc = scaled.row(i);
            for (int k = offsets[static_cast<std::size_t>(i)];
                 k < offsets[static_cast<std::size_t>(i) + 1]; ++k)
                acc += scaled.row(nbrs[static_cast<std::size_t>(k)]);
            out.row(i) = norm[i] * acc;
        }
    } else {
        // y_i = (x_i + sum_j x_j) / dhat_i
        for (int i = 0; i < n; ++i) {
            Eigen::RowVectorXd acc = h.row(i);
            for (int k = offsets[static_cast<std::size_t>(i)];
                 k < offsets[static_cast<std::size_t>(i) + 1]; ++k)
                acc += h.row(nbrs[static_cast<std::size_t>(k)]);
            out.row(i) = norm[i] * acc;
        }
    }
    return out;
}

Eigen::MatrixXd PropagationOperator::apply_transpose(const Eigen::MatrixXd& h) const {
    if (kind == PropagationKind::SymNormWithSelfLoops) return apply(h);  // symmetric
    // (D^{-1} A_hat)^T x = A_hat D^{-1} x
    if (static_cast<int>(h.rows()) != n)
        throw std::invalid_argument("PropagationOperator::apply_transpose: row count mismatch");
    Eigen::MatrixXd scaled = norm.asDiagonal() * h;
    Eigen::MatrixXd out(h.rows(), h.cols());
    for (int i = 0; i < n; ++i) {
        Eigen::RowVectorXd acc = scaled.row(i);
        for (int k = offsets[static_cast<std::size_t>(i)];
             k < offsets[static_cast<std::size_t>(i) + 1]; ++k)
            acc += scaled.row(nbrs[static_cast<std::size_t>(k)]);
        out.row(i) = acc;
    }
    return out;
}

Eigen::MatrixXd PropagationOperator::dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        if (kind == PropagationKind::SymNormWithSelfLoops) {
            m(i, i) = norm[i] * norm[i];
            for (int k = offsets[static_cast<std::size_t>(i)];
                 k < offsets[static_cast<std::size_t>(i) + 1]; ++k) {
                const int j = nbrs[static_cast<std::size_t>(k)];
                m(i, j) = norm[i] * norm[j];
            }
        } else {
            m(i, i) = norm[i];
            for (int k = offsets[static_cast<std::size_t>(i)];
                 k < offsets[static_cast<std::size_t>(i) + 1]; ++k)
                m(i, nbrs[static_cast<std::size_t>(k)]) = norm[i];
        }
    }
    return m;
}

Eigen::MatrixXd propagate(const Graph& g, const Eigen::MatrixXd& h,
                          const PropagationOperator& op, int steps) {
    if (static_cast<int>(h.rows()) != g.n_nodes)
        throw std::invalid_argument("propagate: h row count does not match n_nodes");
    if (steps < 0) throw std::invalid_argument("propagate: steps must be >= 0");
    Eigen::MatrixXd x = h;
    for (int t = 0; t < steps; ++t) x = op.apply(x);
    return x;
}

bool is_connected(const Graph& g) {
    if (g.n_nodes == 0) return true;
    std::vector<char> seen(static_cast<std::size_t>(g.n_nodes), 0);
    std::deque<int> q{0};
    seen[0] = 1;
    int count = 1;
    while (!q.empty()) {
        const int v = q.front();
        q.pop_front();
        for (const int* p = g.neighbors_begin(v); p != g.neighbors_end(v); ++p) {
            if (!seen[static_cast<std::size_t>(*p)]) {
                seen[static_cast<std::size_t>(*p)] = 1;
                ++count;
                q.push_back(*p);
            }
        }
    }
    return count == g.n_nodes;
}

bool is_bipartite(const Graph& g) {
    std::vector<int> color(static_cast<std::size_t>(g.n_nodes), -1);
    for (int start = 0; start < g.n_nodes; ++start) {
        if (color[static_cast<std::size_t>(start)] != -1) continue;
        color[static_cast<std::size_t>(start)] = 0;
        std::deque<int> q{start};
        while (!q.empty()) {
            const int v = q.front();
            q.pop_front();
            for (const int* p = g.neighbors_begin(v); p != g.neighbors_end(v); ++p) {
                if (color[static_cast<std::size_t>(*p)] == -1) {
                    color[static_cast<std::size_t>(*p)] = 1 - color[static_cast<std::size_t>(v)];
                    q.push_back(*p);
                } else if (color[static_cast<std::size_t>(*p)] ==
                           color[static_cast<std::size_t>(v)]) {
                    return false;
                }
            }
        }
    }
    return true;
}

ContractionReport check_contraction(const Graph& g, const Eigen::MatrixXd& h0,
                                    int tau, double ratio_tol) {
    if (tau < 1) throw std::invalid_argument("check_contraction: tau must be >= 1");
    ContractionReport rep;
    rep.tau = tau;
    rep.connected = is_connected(g);
    rep.bipartite_input = is_bipartite(g);
    // A_hat = A + I contains a self-loop at every node, i.e. an odd closed
    // walk, so the propagated graph is never bipartite.
    rep.bipartite_with_self_loops = g.n_nodes == 0;
    rep.preconditions_met = rep.connected && !rep.bipartite_with_self_loops;

    const auto op = make_operator(g, PropagationKind::SymNormWithSelfLoops);
    const Eigen::MatrixXd ht = propagate(g, h0, op, tau);
    rep.max_pair_ratio = 0.0;
    for (int i = 0; i < g.n_nodes; ++i) {
        for (int j = i + 1; j < g.n_nodes; ++j) {
            const double d0 = (h0.row(i) - h0.row(j)).norm();
            const double dt = (ht.row(i) - ht.row(j)).norm();
            const double ratio = d0 <= 1e-300 ? 1.0 : dt / d0;
            rep.max_pair_ratio = std::max(rep.max_pair_ratio, ratio);
            if (ratio > 1.0 + ratio_tol) rep.violated_pairs.emplace_back(i, j);
        }
    }
    return rep;
}

// ----------------------------------------------------------------------------
// file formats

namespace {
std::vector<double> parse_number_row(const std::string& line) {
    std::vector<double> row;
    std::string token;
    std::istringstream ss(line);
    // accept commas or whitespace
    std::string cleaned = line;
    std::replace(cleaned.begin(), cleaned.end(), ',', ' ');
    std::istringstream cs(cleaned);
    double v;
    while (cs >> v) row.push_back(v);
    return row;
}
}  // namespace

Eigen::MatrixXd load_features_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open feature file: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto row = parse_number_row(line);
        if (row.empty()) continue;
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error("feature file has ragged rows: " + path);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("feature file is empty: " + path);
    Eigen::MatrixXd m(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j)
            m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return m;
}

std::vector<std::pair<int, int>> load_edge_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open edge file: " + path);
    std::vector<std::pair<int, int>> edges;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        long long a, b;
        if (!(ss >> a >> b)) throw std::runtime_error("bad edge line: '" + line + "'");
        edges.emplace_back(static_cast<int>(a), static_cast<int>(b));
    }
    return edges;
}

std::vector<int> load_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open label file: " + path);
    std::vector<int> labels;
    long long v;
    while (in >> v) labels.push_back(static_cast<int>(v));
    return labels;
}

Graph load_graph_files(const std::string& edge_path, const std::string& feature_path,
                       const std::optional<std::string>& label_path) {
    Eigen::MatrixXd feats = load_features_csv(feature_path);
    auto edges = load_edge_list(edge_path);
    std::optional<std::vector<int>> labels;
    if (label_path) {
        labels = load_labels(*label_path);
        if (static_cast<int>(labels->size()) != static_cast<int>(feats.rows()))
            throw std::runtime_error("label count does not match feature row count");
    }
    return build_graph(edges, std::move(feats), std::move(labels));
}

void save_edge_list(const Graph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write edge file: " + path);
    for (auto [a, b] : g.undirected_edges()) out << a << " " << b << "\n";
}

void save_features_csv(const Eigen::MatrixXd& features, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write feature file: " + path);
    out.precision(17);
    for (int i = 0; i < features.rows(); ++i) {
        for (int j = 0; j < features.cols(); ++j) {
            if (j) out << ",";
            out << features(i, j);
        }
        out << "\n";
    }
}

void save_labels(const std::vector<int>& labels, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write label file: " + path);
    for (int v : labels) out << v << "\n";
}

}  // namespace gcl
