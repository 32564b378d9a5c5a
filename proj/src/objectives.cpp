#include "gcl/objectives.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace gcl {

PairSims pair_similarities(const TensorPtr& u, const TensorPtr& v,
                           const ProjectionParams& proj, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("pair_similarities: tau must be positive");
    if (u->rows() != v->rows() || u->cols() != v->cols())
        throw std::invalid_argument("pair_similarities: view shapes differ");
    PairSims s;
    s.tau = tau;
    s.z_u = rows_l2_normalize(forward_projection(u, proj));
    s.z_v = rows_l2_normalize(forward_projection(v, proj));
    s.inter = matmul_nt(s.z_u, s.z_v);
    s.intra_u = matmul_nt(s.z_u, s.z_u);
    s.intra_v = matmul_nt(s.z_v, s.z_v);
    return s;
}

namespace {

/// Per-anchor losses for one direction, given the exponentiated matrices.
/// denominator = positive + off-diagonal inter row sum + off-diagonal intra
/// row sum (+ optional extra column), all per Eq. 1's structure.
TensorPtr direction_log_ratio(const TensorPtr& e_inter, const TensorPtr& e_intra,
                              const TensorPtr& extra /* may be null */) {
    TensorPtr pos = diag_col(e_inter);
    TensorPtr denom = add(pos, add(offdiag_row_sum(e_inter), offdiag_row_sum(e_intra)));
    if (extra) denom = add(denom, extra);
    return log_elem(div(pos, denom));
}

TensorPtr direction_log_ratio_weighted(const TensorPtr& e_inter, const TensorPtr& e_intra,
                                       const Eigen::MatrixXd& w) {
    TensorPtr pos = diag_col(e_inter);
    TensorPtr denom = add(pos, add(offdiag_weighted_row_sum(e_inter, w),
                                   offdiag_weighted_row_sum(e_intra, w)));
    return log_elem(div(pos, denom));
}

/// Synthetic-negative contribution for one direction: sum_k exp(theta(z_i, u~_k)/tau).
TensorPtr synth_row_sums(const std::vector<SyntheticNegatives>& synth, const TensorPtr& parents_raw,
                         const TensorPtr& z_anchor, const ProjectionParams& proj, double tau) {
    const int n = z_anchor->rows();
    if (static_cast<int>(synth.size()) != n)
        throw std::invalid_argument("loss_mix: need synthetics for every anchor");
    const auto m = synth.front().mixes.size();
    std::vector<MixRowSpec> flat;
    flat.reserve(static_cast<std::size_t>(n) * m);
    for (int i = 0; i < n; ++i) {
        if (synth[static_cast<std::size_t>(i)].anchor != i)
            throw std::invalid_argument("loss_mix: synthetics out of anchor order");
        if (synth[static_cast<std::size_t>(i)].mixes.size() != m)
            throw std::invalid_argument("loss_mix: every anchor needs the same number of synthetics");
        for (const auto& mix : synth[static_cast<std::size_t>(i)].mixes) flat.push_back(mix);
    }
    TensorPtr mixed = mix_rows(parents_raw, flat);
    TensorPtr z_syn = rows_l2_normalize(forward_projection(mixed, proj));
    TensorPtr theta = grouped_row_dot(z_syn, z_anchor, static_cast<int>(m));
    return row_sum(exp_elem(scale(theta, 1.0 / tau)));
}

}  // namespace

TensorPtr loss_infonce(const PairSims& sims) {
    const int n = sims.n();
    if (n < 2) throw std::invalid_argument("loss_infonce: need at least 2 nodes");
    const double inv_tau = 1.0 / sims.tau;
    TensorPtr e_inter = exp_elem(scale(sims.inter, inv_tau));
    TensorPtr e_intra_u = exp_elem(scale(sims.intra_u, inv_tau));
    TensorPtr e_intra_v = exp_elem(scale(sims.intra_v, inv_tau));
    TensorPtr l_uv = direction_log_ratio(e_inter, e_intra_u, nullptr);
    TensorPtr l_vu = direction_log_ratio(transpose(e_inter), e_intra_v, nullptr);
    return scale(sum_all(add(l_uv, l_vu)), -1.0 / (2.0 * n));
}

WeightMatrix compute_weights(const Eigen::MatrixXd& s_hat, const Eigen::MatrixXd& posterior) {
    const auto n = s_hat.rows();
    if (posterior.rows() != n || posterior.cols() != n || s_hat.cols() != n)
        throw std::invalid_argument("compute_weights: matrices must be n x n");
    WeightMatrix out;
    out.w = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double denom = 0.0;
        for (Eigen::Index k = 0; k < n; ++k)
            if (k != i) denom += posterior(i, k) * s_hat(i, k);
        denom /= static_cast<double>(n - 1);
        if (denom < 1e-12) {
            for (Eigen::Index k = 0; k < n; ++k)
                if (k != i) out.w(i, k) = 1.0;
            out.underflow_rows.push_back(static_cast<int>(i));
            continue;
        }
        for (Eigen::Index k = 0; k < n; ++k)
            if (k != i) out.w(i, k) = posterior(i, k) * s_hat(i, k) / denom;
    }
    return out;
}

TensorPtr loss_weighted(const PairSims& sims, const WeightMatrix& w_uv,
                        const WeightMatrix& w_vu) {
    const int n = sims.n();
    if (n < 2) throw std::invalid_argument("loss_weighted: need at least 2 nodes");
    if (w_uv.w.minCoeff() < 0.0 || w_vu.w.minCoeff() < 0.0)
        throw std::invalid_argument("loss_weighted: negative weights");
    const double inv_tau = 1.0 / sims.tau;
    TensorPtr e_inter = exp_elem(scale(sims.inter, inv_tau));
    TensorPtr e_intra_u = exp_elem(scale(sims.intra_u, inv_tau));
    TensorPtr e_intra_v = exp_elem(scale(sims.intra_v, inv_tau));
    TensorPtr l_uv = direction_log_ratio_weighted(e_inter, e_intra_u, w_uv.w);
    TensorPtr l_vu = direction_log_ratio_weighted(transpose(e_inter), e_intra_v, w_vu.w);
    return scale(sum_all(add(l_uv, l_vu)), -1.0 / (2.0 * n));
}

SyntheticNegatives synthesize_negatives(int anchor_idx, const Eigen::VectorXd& hardness,
                                        const Eigen::VectorXd& posterior_row, int n_prime,
                                        int m, RngStream& rng) {
    const int n = static_cast<int>(hardness.size());
    if (anchor_idx < 0 || anchor_idx >= n)
        throw std::invalid_argument("synthesize_negatives: anchor out of range");
    if (n_prime < 2) throw std::invalid_argument("synthesize_negatives: N' must be >= 2");
    if (n_prime > n - 1)
        throw std::invalid_argument("synthesize_negatives: N' exceeds negative count");
    if (m < 1) throw std::invalid_argument("synthesize_negatives: m must be >= 1");

    std::vector<int> candidates;
    candidates.reserve(static_cast<std::size_t>(n) - 1);
    for (int k = 0; k < n; ++k)
        if (k != anchor_idx) candidates.push_back(k);
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](int a, int b) { return hardness[a] > hardness[b]; });
    candidates.resize(static_cast<std::size_t>(n_prime));

    SyntheticNegatives out;
    out.anchor = anchor_idx;
    out.mixes.reserve(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) {
        auto pick = rng.sample_without_replacement(n_prime, 2);
        const int p = candidates[static_cast<std::size_t>(pick[0])];
        const int q = candidates[static_cast<std::size_t>(pick[1])];
        const double pp = posterior_row[p], pq = posterior_row[q];
        double alpha;
        if (pp + pq <= 1e-300) {
            alpha = 0.5;
            out.zero_posterior_flag = true;
        } else {
            alpha = pp / (pp + pq);
        }
        out.mixes.push_back({p, q, alpha});
    }
    return out;
}

TensorPtr loss_mix(const PairSims& sims, const TensorPtr& u_raw, const TensorPtr& v_raw,
                   const ProjectionParams& proj,
                   const std::vector<SyntheticNegatives>& synth_uv,
                   const std::vector<SyntheticNegatives>& synth_vu) {
    const int n = sims.n();
    if (n < 2) throw std::invalid_argument("loss_mix: need at least 2 nodes");
    const bool have_uv = !synth_uv.empty() && !synth_uv.front().mixes.empty();
    const bool have_vu = !synth_vu.empty() && !synth_vu.front().mixes.empty();
    const double inv_tau = 1.0 / sims.tau;
    TensorPtr e_inter = exp_elem(scale(sims.inter, inv_tau));
    TensorPtr e_intra_u = exp_elem(scale(sims.intra_u, inv_tau));
    TensorPtr e_intra_v = exp_elem(scale(sims.intra_v, inv_tau));
    TensorPtr syn_uv =
        have_uv ? synth_row_sums(synth_uv, v_raw, sims.z_u, proj, sims.tau) : nullptr;
    TensorPtr syn_vu =
        have_vu ? synth_row_sums(synth_vu, u_raw, sims.z_v, proj, sims.tau) : nullptr;
    TensorPtr l_uv = direction_log_ratio(e_inter, e_intra_u, syn_uv);
    TensorPtr l_vu = direction_log_ratio(transpose(e_inter), e_intra_v, syn_vu);
    return scale(sum_all(add(l_uv, l_vu)), -1.0 / (2.0 * n));
}

}  // namespace gcl
