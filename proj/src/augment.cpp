#include "gcl/augment.hpp"

#include <stdexcept>

namespace gcl {

namespace {
void check_prob(double p, const char* name) {
    if (!(p >= 0.0 && p < 1.0))
        throw std::invalid_argument(std::string(name) + " must be in [0, 1)");
}
}  // namespace

void AugmentConfig::validate() const {
    check_prob(p_edge_drop_1, "p_edge_drop_1");
    check_prob(p_edge_drop_2, "p_edge_drop_2");
    check_prob(p_feat_mask_1, "p_feat_mask_1");
    check_prob(p_feat_mask_2, "p_feat_mask_2");
}

Graph augment(const Graph& g, double p_edge, double p_feat, RngStream& rng,
              FeatureMaskMode mask_mode) {
    check_prob(p_edge, "p_edge");
    check_prob(p_feat, "p_feat");

    std::vector<std::pair<int, int>> kept;
    for (auto e : g.undirected_edges())
        if (rng.uniform() >= p_edge) kept.push_back(e);

    Eigen::MatrixXd feats = g.features;
    if (mask_mode == FeatureMaskMode::Columns) {
        for (int j = 0; j < feats.cols(); ++j)
            if (rng.uniform() < p_feat) feats.col(j).setZero();
    } else {
        for (int i = 0; i < feats.rows(); ++i)
            for (int j = 0; j < feats.cols(); ++j)
                if (rng.uniform() < p_feat) feats(i, j) = 0.0;
    }

    return build_graph(kept, std::move(feats), g.labels);
}

}  // namespace gcl
