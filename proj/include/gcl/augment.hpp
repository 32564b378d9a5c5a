#pragma once

#include "gcl/graph.hpp"
#include "gcl/rng.hpp"

namespace gcl {

enum class FeatureMaskMode {
    Columns,  // whole feature dimensions zeroed across all nodes
    Entries,  // each (node, dim) entry masked independently
};

struct AugmentConfig {
    double p_edge_drop_1 = 0.3;
    double p_edge_drop_2 = 0.4;
    double p_feat_mask_1 = 0.3;
    double p_feat_mask_2 = 0.4;
    FeatureMaskMode mask_mode = FeatureMaskMode::Columns;

    void validate() const;
};

/// Stochastic view t(G): each undirected edge is dropped with probability
/// p_edge (both directions together); features are masked with probability
/// p_feat per column (or per entry). Node set, labels and dimensions are
/// unchanged; the result is always a subgraph of g.
Graph augment(const Graph& g, double p_edge, double p_feat, RngStream& rng,
              FeatureMaskMode mask_mode = FeatureMaskMode::Columns);

}  // namespace gcl
