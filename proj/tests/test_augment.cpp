#include <doctest.h>

#include <random>

#include "gcl/augment.hpp"
#include "oracles.hpp"

using namespace gcl;

TEST_CASE("zero probabilities leave the graph unchanged") {
    std::mt19937_64 eng(1);
    Graph g = build_graph(oracle::random_connected_edges(eng, 8, 0.3),
                          oracle::random_matrix(eng, 8, 3));
    RngStream rng(1, "aug");
    Graph out = augment(g, 0.0, 0.0, rng);
    CHECK(out.undirected_edges() == g.undirected_edges());
    CHECK(out.features == g.features);
}

TEST_CASE("probabilities outside [0,1) are rejected") {
    Graph g = build_graph({{0, 1}}, Eigen::MatrixXd::Zero(2, 1));
    RngStream rng(2, "aug");
    CHECK_THROWS_AS(augment(g, 1.0, 0.0, rng), std::invalid_argument);
    CHECK_THROWS_AS(augment(g, 0.0, -0.1, rng), std::invalid_argument);
    AugmentConfig bad;
    bad.p_feat_mask_2 = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("augmentation is deterministic given the seed") {
    std::mt19937_64 eng(3);
    Graph g = build_graph(oracle::random_connected_edges(eng, 12, 0.4),
                          oracle::random_matrix(eng, 12, 5));
    RngStream r1(77, "aug"), r2(77, "aug");
    Graph a = augment(g, 0.4, 0.3, r1);
    Graph b = augment(g, 0.4, 0.3, r2);
    CHECK(a.undirected_edges() == b.undirected_edges());
    CHECK(a.features == b.features);
}

TEST_CASE("augmented graph is a symmetric subgraph on the same node set") {
    std::mt19937_64 eng(4);
    Graph g = build_graph(oracle::random_connected_edges(eng, 15, 0.4),
                          oracle::random_matrix(eng, 15, 4));
    RngStream rng(9, "aug");
    for (int trial = 0; trial < 50; ++trial) {
        Graph out = augment(g, 0.5, 0.5, rng);
        CHECK(out.n_nodes == g.n_nodes);
        for (auto [i, j] : out.undirected_edges()) {
            CHECK(g.has_edge(i, j));
            CHECK(out.has_edge(j, i));
        }
    }
}

TEST_CASE("column mask frequency matches its probability (Monte-Carlo)") {
    // p_feat = 0.999 on 1-column features: the column must vanish with
    // empirical frequency ~ 0.999 over many seeds (binomial 3-sigma bound)
    Graph g = build_graph({{0, 1}}, Eigen::MatrixXd::Ones(2, 1));
    const int trials = 10000;
    int zeroed = 0;
    for (int t = 0; t < trials; ++t) {
        RngStream rng(static_cast<std::uint64_t>(t), "aug");
        Graph out = augment(g, 0.0, 0.999, rng);
        if (out.features.cwiseAbs().maxCoeff() == 0.0) ++zeroed;
    }
    const double p = 0.999;
    const double sigma = std::sqrt(p * (1 - p) * trials);
    CHECK(std::abs(zeroed - p * trials) <= 3.0 * sigma + 1.0);
}

TEST_CASE("edge survival count on K4 matches the binomial mean (Monte-Carlo)") {
    std::vector<std::pair<int, int>> k4;
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) k4.emplace_back(i, j);
    Graph g = build_graph(k4, Eigen::MatrixXd::Zero(4, 1));
    const int trials = 10000;
    long surviving = 0;
    for (int t = 0; t < trials; ++t) {
        RngStream rng(static_cast<std::uint64_t>(t), "aug");
        surviving += augment(g, 0.5, 0.0, rng).n_edges();
    }
    const double mean = static_cast<double>(surviving) / trials;
    const double sigma = std::sqrt(6.0 * 0.25 / trials);  // sd of the mean
    CHECK(std::abs(mean - 3.0) <= 3.0 * sigma);
}

TEST_CASE("entry-wise mask mode masks individual cells") {
    Graph g = build_graph({{0, 1}}, Eigen::MatrixXd::Ones(2, 4));
    RngStream rng(5, "aug");
    Graph out = augment(g, 0.0, 0.5, rng, FeatureMaskMode::Entries);
    // with p=0.5 over 8 entries, all-or-nothing columns would be a 2^-4 fluke
    int zeros = 0;
    for (Eigen::Index i = 0; i < out.features.size(); ++i)
        if (out.features(i) == 0.0) ++zeros;
    CHECK(zeros > 0);
    CHECK(zeros < 8);
    bool mixed_column = false;
    for (int j = 0; j < 4; ++j) {
        const double colsum = out.features.col(j).sum();
        if (colsum > 0.0 && colsum < 2.0) mixed_column = true;
    }
    CHECK(mixed_column);
}
