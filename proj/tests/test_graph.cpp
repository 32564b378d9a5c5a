#include <doctest.h>

#include <filesystem>
#include <random>
#include <set>

#include "gcl/graph.hpp"
#include "oracles.hpp"

using namespace gcl;

namespace {
Graph make(const std::vector<std::pair<int, int>>& edges, int n, int fdim = 1) {
    return build_graph(edges, Eigen::MatrixXd::Zero(n, fdim));
}
}  // namespace

TEST_CASE("build_graph minimal and triangle degree vectors") {
    Graph g1 = make({{0, 1}}, 2);
    CHECK(g1.degree == std::vector<int>{1, 1});

    Graph g3 = build_graph({{0, 1}, {1, 2}, {0, 2}}, Eigen::MatrixXd::Zero(3, 2));
    CHECK(g3.degree == std::vector<int>{2, 2, 2});
}

TEST_CASE("duplicate and mirrored pairs collapse to one undirected edge") {
    Graph g = make({{0, 1}, {1, 0}, {0, 1}}, 2);
    // oracle: set comparison on the undirected edge set
    std::set<std::pair<int, int>> expected{{0, 1}};
    auto edges = g.undirected_edges();
    CHECK(std::set<std::pair<int, int>>(edges.begin(), edges.end()) == expected);
    CHECK(g.n_edges() == 1);
}

TEST_CASE("build_graph rejects bad inputs") {
    CHECK_THROWS_AS(make({{0, 5}}, 3), std::invalid_argument);
    CHECK_THROWS_AS(make({{-1, 0}}, 3), std::invalid_argument);
    CHECK_THROWS_AS(build_graph({{0, 1}}, Eigen::MatrixXd::Zero(2, 1),
                                std::vector<int>{0, 1, 0}),
                    std::invalid_argument);
}

TEST_CASE("self-loop pairs are dropped with a warning") {
    std::vector<std::string> warnings;
    Graph g = build_graph({{0, 0}, {0, 1}}, Eigen::MatrixXd::Zero(2, 1), std::nullopt, &warnings);
    CHECK(g.n_edges() == 1);
    CHECK(warnings.size() == 1);
}

TEST_CASE("neighbor lists are sorted and deterministic") {
    Graph g = make({{2, 0}, {2, 3}, {2, 1}, {0, 3}}, 4);
    std::vector<int> nbrs(g.neighbors_begin(2), g.neighbors_end(2));
    CHECK(nbrs == std::vector<int>{0, 1, 3});
}

TEST_CASE("propagate identity and fixed point") {
    Graph g = make({{0, 1}}, 2);
    const auto op = make_operator(g, PropagationKind::SymNormWithSelfLoops);
    Eigen::MatrixXd h(2, 2);
    h << 1, 2, 3, 4;
    CHECK(propagate(g, h, op, 0) == h);

    // single node: self-loop normalization makes the operator the identity
    Graph iso = make({}, 1);
    const auto op1 = make_operator(iso, PropagationKind::SymNormWithSelfLoops);
    Eigen::MatrixXd h1(1, 1);
    h1 << 5;
    for (int steps : {1, 3, 10})
        CHECK(propagate(iso, h1, op1, steps)(0, 0) == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("P3 one step matches the dense oracle") {
    Graph g = make({{0, 1}, {1, 2}}, 3, 3);
    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(3, 3);
    const auto op = make_operator(g, PropagationKind::SymNormWithSelfLoops);
    const Eigen::MatrixXd got = propagate(g, h, op, 1);
    const Eigen::MatrixXd want = oracle::dense_propagate(oracle::dense_sym_norm(g), h, 1);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sparse and dense propagation agree elementwise on random graphs") {
    std::mt19937_64 eng(99);
    for (int trial = 0; trial < 20; ++trial) {
        std::uniform_int_distribution<int> size(2, 64);
        const int n = size(eng);
        auto edges = oracle::random_connected_edges(eng, n, 0.1);
        Graph g = build_graph(edges, oracle::random_matrix(eng, n, 4));
        const Eigen::MatrixXd h = oracle::random_matrix(eng, n, 4);
        for (auto kind : {PropagationKind::SymNormWithSelfLoops, PropagationKind::MeanAgg}) {
            const auto op = make_operator(g, kind);
            const Eigen::MatrixXd dense = kind == PropagationKind::SymNormWithSelfLoops
                                              ? oracle::dense_sym_norm(g)
                                              : oracle::dense_mean_agg(g);
            const Eigen::MatrixXd got = propagate(g, h, op, 3);
            const Eigen::MatrixXd want = oracle::dense_propagate(dense, h, 3);
            CHECK((got - want).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
}

TEST_CASE("operator transpose application matches dense transpose") {
    std::mt19937_64 eng(7);
    const int n = 12;
    Graph g = build_graph(oracle::random_connected_edges(eng, n, 0.2),
                          oracle::random_matrix(eng, n, 2));
    const Eigen::MatrixXd h = oracle::random_matrix(eng, n, 3);
    const auto op = make_operator(g, PropagationKind::MeanAgg);
    const Eigen::MatrixXd want = oracle::dense_mean_agg(g).transpose() * h;
    CHECK((op.apply_transpose(h) - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("D_hat^{1/2} 1 is a fixed vector of the sym-norm operator") {
    std::mt19937_64 eng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 3 + static_cast<int>(eng() % 40);
        Graph g = build_graph(oracle::random_connected_edges(eng, n, 0.15),
                              oracle::random_matrix(eng, n, 2));
        const auto op = make_operator(g, PropagationKind::SymNormWithSelfLoops);
        Eigen::MatrixXd e(n, 1);
        for (int i = 0; i < n; ++i)
            e(i, 0) = std::sqrt(static_cast<double>(g.degree[static_cast<std::size_t>(i)]) + 1.0);
        CHECK((op.apply(e) - e).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("contraction holds on K3 with one-hot features") {
    Graph g = build_graph({{0, 1}, {1, 2}, {0, 2}}, Eigen::MatrixXd::Identity(3, 3));
    const auto rep = check_contraction(g, g.features, 50);
    CHECK(rep.preconditions_met);
    CHECK(rep.max_pair_ratio <= 1.0 + 1e-8);
    CHECK(rep.violated_pairs.empty());
}

TEST_CASE("identical features give ratio exactly 1") {
    Graph g = build_graph({{0, 1}, {1, 2}, {0, 2}}, Eigen::MatrixXd::Ones(3, 2));
    const auto rep = check_contraction(g, g.features, 10);
    CHECK(rep.max_pair_ratio == doctest::Approx(1.0));
}

TEST_CASE("star graph contracts after long propagation") {
    std::vector<std::pair<int, int>> edges;
    for (int leaf = 1; leaf < 7; ++leaf) edges.emplace_back(0, leaf);
    std::mt19937_64 eng(5);
    Graph g = build_graph(edges, oracle::random_matrix(eng, 7, 3));
    const auto rep = check_contraction(g, g.features, 100);
    CHECK(rep.preconditions_met);
    // stars are bipartite as input graphs but not once self-loops are added
    CHECK(rep.bipartite_input);
    CHECK(!rep.bipartite_with_self_loops);
    CHECK(rep.max_pair_ratio <= 1.0 + 1e-8);
}

TEST_CASE("precondition flags for disconnected and bipartite graphs") {
    // two disjoint triangles
    Graph two = build_graph({{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}},
                            Eigen::MatrixXd::Identity(6, 6));
    const auto rep = check_contraction(two, two.features, 10);
    CHECK(!rep.connected);
    CHECK(!rep.preconditions_met);

    // even cycle: bipartite before self-loops, fine after
    Graph c4 = build_graph({{0, 1}, {1, 2}, {2, 3}, {3, 0}}, Eigen::MatrixXd::Identity(4, 4));
    CHECK(is_bipartite(c4));
    const auto rep4 = check_contraction(c4, c4.features, 50);
    CHECK(rep4.bipartite_input);
    CHECK(rep4.preconditions_met);
    CHECK(rep4.max_pair_ratio <= 1.0 + 1e-8);
}

TEST_CASE("graph files round-trip") {
    std::mt19937_64 eng(123);
    Graph g = build_graph({{0, 1}, {1, 2}}, oracle::random_matrix(eng, 3, 2),
                          std::vector<int>{0, 1, 1});
    const std::string dir = "/tmp/gcl_graph_io_test";
    std::filesystem::create_directories(dir);
    save_edge_list(g, dir + "/edges.txt");
    save_features_csv(g.features, dir + "/features.csv");
    save_labels(*g.labels, dir + "/labels.txt");
    Graph back = load_graph_files(dir + "/edges.txt", dir + "/features.csv",
                                  dir + "/labels.txt");
    CHECK(back.n_nodes == g.n_nodes);
    CHECK(back.undirected_edges() == g.undirected_edges());
    CHECK((back.features - g.features).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(*back.labels == *g.labels);
}
