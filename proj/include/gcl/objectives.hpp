#pragma once

#include <Eigen/Dense>
#include <vector>

#include "gcl/nn.hpp"
#include "gcl/rng.hpp"
#include "gcl/tensor.hpp"

namespace gcl {

/// Cosine critic values for one view pair. inter(i,k) = theta(u_i, v_k);
/// intra matrices have unit diagonals which every loss excludes from its
/// negative sums. z_u / z_v keep the normalized projections so synthetic
/// negatives can reuse them.
struct PairSims {
    TensorPtr inter;
    TensorPtr intra_u;
    TensorPtr intra_v;
    TensorPtr z_u;
    TensorPtr z_v;
    double tau = 0.5;

    int n() const { return inter ? inter->rows() : 0; }
};

/// Projects both views, row-normalizes and forms the three similarity
/// matrices. Throws when tau <= 0 or the views disagree in shape.
PairSims pair_similarities(const TensorPtr& u, const TensorPtr& v,
                           const ProjectionParams& proj, double tau);

/// Plain InfoNCE over both symmetric directions:
/// J = -(1/2n) sum_i [l(u_i, v_i) + l(v_i, u_i)], each l with the positive
/// term plus all inter-view and intra-view negatives in the denominator.
TensorPtr loss_infonce(const PairSims& sims);

/// Hardness weights, one row per anchor, row mean over k != i equal to 1.
struct WeightMatrix {
    Eigen::MatrixXd w;                // n x n, diagonal unused (zero)
    std::vector<int> underflow_rows;  // rows that fell back to uniform weights
};

/// w(i,k) = p(c_t|s_ik) * s_ik / mean_{j != i}[p(c_t|s_ij) * s_ij], where
/// s_hat is the Min-Max-normalized inter-view similarity matrix the posterior
/// was fitted on. Rows whose denominator underflows (< 1e-12) get uniform
/// weight 1 and are flagged.
WeightMatrix compute_weights(const Eigen::MatrixXd& s_hat, const Eigen::MatrixXd& posterior);

/// InfoNCE with every negative term (inter- and intra-view alike) scaled by
/// its anchor's hardness weight. w_uv weights the u-anchored direction,
/// w_vu the v-anchored one. With all-ones weights this reduces to
/// loss_infonce.
TensorPtr loss_weighted(const PairSims& sims, const WeightMatrix& w_uv,
                        const WeightMatrix& w_vu);

/// Synthetic hard negatives for one anchor: convex combinations of pairs of
/// its hardest inter-view negatives. Gradients flow through the combination
/// into the parents; the selection itself is constant.
struct SyntheticNegatives {
    int anchor = 0;
    std::vector<MixRowSpec> mixes;    // size m; p/q index rows of the parent view
    bool zero_posterior_flag = false; // some pair had both posteriors ~ 0
};

/// Picks the n_prime negatives with the largest hardness score (ties broken
/// toward the smaller index), then draws m parent pairs uniformly without
/// replacement from that pool; alpha_k = post_p / (post_p + post_q).
/// hardness/posterior are indexed by negative id; the anchor entry is ignored.
SyntheticNegatives synthesize_negatives(int anchor_idx, const Eigen::VectorXd& hardness,
                                        const Eigen::VectorXd& posterior_row, int n_prime,
                                        int m, RngStream& rng);

/// InfoNCE with m extra synthetic negatives per anchor in each direction.
/// synth_uv entries mix rows of v_raw (for u-anchored terms), synth_vu rows
/// of u_raw. Either list may be empty (m = 0), in which case the loss equals
/// loss_infonce exactly.
TensorPtr loss_mix(const PairSims& sims, const TensorPtr& u_raw, const TensorPtr& v_raw,
                   const ProjectionParams& proj,
                   const std::vector<SyntheticNegatives>& synth_uv,
                   const std::vector<SyntheticNegatives>& synth_vu);

}  // namespace gcl
