#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gcl {

/// Undirected graph with dense node features and optional class labels.
///
/// Adjacency is stored as CSR neighbor lists, sorted ascending per node, no
/// self-loops, no duplicates, symmetric. Propagation operators add the
/// self-loop themselves (A_hat = A + I).
struct Graph {
    int n_nodes = 0;
    std::vector<int> offsets;  // size n_nodes + 1
    std::vector<int> nbrs;     // size 2 * n_edges
    std::vector<int> degree;   // cached neighbor counts, size n_nodes
    Eigen::MatrixXd features;  // n_nodes x f_dim
    std::optional<std::vector<int>> labels;

    int n_edges() const { return static_cast<int>(nbrs.size()) / 2; }
    int feature_dim() const { return static_cast<int>(features.cols()); }

    const int* neighbors_begin(int v) const { return nbrs.data() + offsets[static_cast<std::size_t>(v)]; }
    const int* neighbors_end(int v) const { return nbrs.data() + offsets[static_cast<std::size_t>(v) + 1]; }

    bool has_edge(int u, int v) const;

    /// Undirected edge list with i < j, sorted lexicographically.
    std::vector<std::pair<int, int>> undirected_edges() const;
};

/// Builds a Graph from an arbitrary pair list. Pairs are treated as
/// undirected: (i,j) and (j,i) collapse to one edge, duplicates are dropped.
/// Self-loop pairs are dropped with a warning (normalization re-adds them).
/// Throws std::invalid_argument on out-of-range indices or a feature/node
/// count mismatch.
Graph build_graph(const std::vector<std::pair<int, int>>& edge_list,
                  Eigen::MatrixXd features,
                  std::optional<std::vector<int>> labels = std::nullopt,
                  std::vector<std::string>* warnings = nullptr);

enum class PropagationKind {
    SymNormWithSelfLoops,  // D_hat^{-1/2} (A+I) D_hat^{-1/2}
    MeanAgg,               // D_hat^{-1} (A+I)
};

/// Normalized propagation operator over a fixed graph. Owns its own copy of
/// the adjacency so it stays valid independently of the source Graph.
struct PropagationOperator {
    PropagationKind kind = PropagationKind::SymNormWithSelfLoops;
    int n = 0;
    std::vector<int> offsets;
    std::vector<int> nbrs;
    Eigen::VectorXd norm;  // sym: 1/sqrt(deg+1); mean: 1/(deg+1)

    Eigen::MatrixXd apply(const Eigen::MatrixXd& h) const;
    Eigen::MatrixXd apply_transpose(const Eigen::MatrixXd& h) const;

    /// Explicit dense matrix of the operator; test oracle and tiny-graph path.
    Eigen::MatrixXd dense() const;
};

PropagationOperator make_operator(const Graph& g, PropagationKind kind);

/// steps successive applications of the operator; steps = 0 returns h.
Eigen::MatrixXd propagate(const Graph& g, const Eigen::MatrixXd& h,
                          const PropagationOperator& op, int steps);

bool is_connected(const Graph& g);

/// BFS 2-coloring of the stored graph (without the implicit self-loops).
bool is_bipartite(const Graph& g);

struct ContractionReport {
    bool connected = false;
    bool bipartite_input = false;        // 2-colorability of the input graph
    bool bipartite_with_self_loops = false;  // always false for n >= 1
    bool preconditions_met = false;      // connected and not bipartite_with_self_loops
    double max_pair_ratio = 0.0;
    std::vector<std::pair<int, int>> violated_pairs;  // ratio > 1 + ratio_tol
    int tau = 0;
};

/// Compares pairwise embedding distances before and after tau steps of
/// sym-normalized propagation. Pairs with zero initial distance have their
/// ratio defined as 1. Precondition failures are reported, not thrown.
ContractionReport check_contraction(const Graph& g, const Eigen::MatrixXd& h0,
                                    int tau, double ratio_tol = 1e-8);

// --- file format: edge list (two ints per line), feature CSV, label file ---

Eigen::MatrixXd load_features_csv(const std::string& path);
std::vector<std::pair<int, int>> load_edge_list(const std::string& path);
std::vector<int> load_labels(const std::string& path);
Graph load_graph_files(const std::string& edge_path, const std::string& feature_path,
                       const std::optional<std::string>& label_path);

void save_edge_list(const Graph& g, const std::string& path);
void save_features_csv(const Eigen::MatrixXd& features, const std::string& path);
void save_labels(const std::vector<int>& labels, const std::string& path);

}  // namespace gcl
