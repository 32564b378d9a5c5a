#include "gcl/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <set>
#include <stdexcept>

namespace gcl {

Mode mode_from_string(const std::string& s) {
    if (s == "base") return Mode::Base;
    if (s == "weight") return Mode::Weight;
    if (s == "mix") return Mode::Mix;
    throw std::invalid_argument("unknown mode: " + s);
}

std::string to_string(Mode m) {
    switch (m) {
        case Mode::Base: return "base";
        case Mode::Weight: return "weight";
        case Mode::Mix: return "mix";
    }
    return "?";
}

PosteriorEval posterior_eval_from_string(const std::string& s) {
    if (s == "frozen-matrix") return PosteriorEval::FrozenMatrix;
    if (s == "frozen-model") return PosteriorEval::FrozenModel;
    throw std::invalid_argument("unknown posterior eval: " + s);
}

std::string to_string(PosteriorEval p) {
    return p == PosteriorEval::FrozenMatrix ? "frozen-matrix" : "frozen-model";
}

MixtureKind mixture_from_string(const std::string& s) {
    if (s == "bmm") return MixtureKind::Bmm;
    if (s == "gmm") return MixtureKind::Gmm;
    throw std::invalid_argument("unknown mixture kind: " + s);
}

std::string to_string(MixtureKind k) { return k == MixtureKind::Bmm ? "bmm" : "gmm"; }

InductiveNegatives inductive_negatives_from_string(const std::string& s) {
    if (s == "seeds-only") return InductiveNegatives::SeedsOnly;
    if (s == "all-subgraph-nodes") return InductiveNegatives::AllSubgraphNodes;
    throw std::invalid_argument("unknown inductive-negatives value: " + s);
}

std::string to_string(InductiveNegatives v) {
    return v == InductiveNegatives::SeedsOnly ? "seeds-only" : "all-subgraph-nodes";
}

void TrainConfig::validate() const {
    if (tau <= 0.0) throw std::invalid_argument("config: tau must be positive");
    if (lr < 0.0) throw std::invalid_argument("config: lr must be >= 0");
    if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
    if (hidden_dim < 1) throw std::invalid_argument("config: hidden-dim must be >= 1");
    if (mode != Mode::Base) {
        if (fit_epoch < 0 || fit_epoch >= epochs)
            throw std::invalid_argument("config: need 0 <= E < epochs");
        if (!(w_init > 0.0 && w_init < 1.0))
            throw std::invalid_argument("config: w-init must be in (0,1)");
        if (em_iters < 1) throw std::invalid_argument("config: I must be >= 1");
        if (m_prime < 2) throw std::invalid_argument("config: M' must be >= 2");
    }
    if (mode == Mode::Mix) {
        if (n_prime < 2) throw std::invalid_argument("config: N' must be >= 2");
        if (num_synthetic < 1) throw std::invalid_argument("config: m must be >= 1");
    }
    augment.validate();
    if (inductive) {
        if (batch_size < 2) throw std::invalid_argument("config: batch-size must be >= 2");
        if (fanouts.empty()) throw std::invalid_argument("config: fanouts must be non-empty");
        for (int f : fanouts)
            if (f < 0) throw std::invalid_argument("config: fanouts must be >= 0");
    }
    if (probe_runs < 1) throw std::invalid_argument("config: probe-runs must be >= 1");
    if (!(probe_train_frac > 0.0 && probe_train_frac < 1.0))
        throw std::invalid_argument("config: probe-train-frac must be in (0,1)");
    if (probe_l2 < 0.0) throw std::invalid_argument("config: probe-l2 must be >= 0");
}

double PosteriorStore::posterior_at(double s_normalized) const {
    if (bmm) return posterior_true(*bmm, s_normalized);
    if (gmm) return posterior_true(*gmm, s_normalized);
    throw std::logic_error("PosteriorStore: not fitted");
}

namespace {

std::uint64_t hash_bytes(std::uint64_t h, const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t hash_matrix(std::uint64_t h, const Eigen::MatrixXd& m) {
    return hash_bytes(h, m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
}

}  // namespace

std::uint64_t PosteriorStore::compute_checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    h = hash_matrix(h, posterior);
    for (const auto& m : per_batch) h = hash_matrix(h, m);
    if (bmm) {
        h = hash_bytes(h, bmm->lambda.data(), sizeof(double) * 2);
        h = hash_bytes(h, bmm->alpha.data(), sizeof(double) * 2);
        h = hash_bytes(h, bmm->beta.data(), sizeof(double) * 2);
        h = hash_bytes(h, &bmm->true_component, sizeof(int));
        h = hash_bytes(h, &bmm->norm_min, sizeof(double));
        h = hash_bytes(h, &bmm->norm_max, sizeof(double));
    }
    if (gmm) {
        h = hash_bytes(h, gmm->lambda.data(), sizeof(double) * 2);
        h = hash_bytes(h, gmm->mu.data(), sizeof(double) * 2);
        h = hash_bytes(h, gmm->sigma2.data(), sizeof(double) * 2);
        h = hash_bytes(h, &gmm->true_component, sizeof(int));
        h = hash_bytes(h, &gmm->norm_min, sizeof(double));
        h = hash_bytes(h, &gmm->norm_max, sizeof(double));
    }
    return h;
}

std::vector<double> TrainResult::loss_sequence() const {
    std::vector<double> out;
    out.reserve(epochs.size());
    for (const auto& e : epochs) out.push_back(e.loss);
    return out;
}

SimilarityHistogram make_similarity_histogram(int epoch, const Eigen::MatrixXd& inter_sims,
                                              const std::vector<int>& labels, int bins) {
    SimilarityHistogram h;
    h.epoch = epoch;
    h.true_neg_counts.assign(static_cast<std::size_t>(bins), 0);
    h.false_neg_counts.assign(static_cast<std::size_t>(bins), 0);
    double sum_true = 0.0, sum_false = 0.0;
    long n_true = 0, n_false = 0;
    const auto n = inter_sims.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < n; ++k) {
            if (i == k) continue;
            const double s = inter_sims(i, k);
            int bin = static_cast<int>(std::floor((s - h.bin_lo) / (h.bin_hi - h.bin_lo) * bins));
            bin = std::min(bins - 1, std::max(0, bin));
            const bool same_class = labels[static_cast<std::size_t>(i)] ==
                                    labels[static_cast<std::size_t>(k)];
            if (same_class) {  // false negative: shares the anchor's class
                ++h.false_neg_counts[static_cast<std::size_t>(bin)];
                sum_false += s;
                ++n_false;
            } else {
                ++h.true_neg_counts[static_cast<std::size_t>(bin)];
                sum_true += s;
                ++n_true;
            }
        }
    }
    h.mean_sim_true_neg = n_true > 0 ? sum_true / static_cast<double>(n_true) : 0.0;
    h.mean_sim_false_neg = n_false > 0 ? sum_false / static_cast<double>(n_false) : 0.0;
    return h;
}

namespace {

void merge_histograms(SimilarityHistogram& into, const SimilarityHistogram& other) {
    long n_into_t = 0, n_into_f = 0, n_other_t = 0, n_other_f = 0;
    for (long c : into.true_neg_counts) n_into_t += c;
    for (long c : into.false_neg_counts) n_into_f += c;
    for (long c : other.true_neg_counts) n_other_t += c;
    for (long c : other.false_neg_counts) n_other_f += c;
    for (std::size_t i = 0; i < into.true_neg_counts.size(); ++i) {
        into.true_neg_counts[i] += other.true_neg_counts[i];
        into.false_neg_counts[i] += other.false_neg_counts[i];
    }
    auto wavg = [](double a, long na, double b, long nb) {
        return na + nb > 0 ? (a * static_cast<double>(na) + b * static_cast<double>(nb)) /
                                 static_cast<double>(na + nb)
                           : 0.0;
    };
    into.mean_sim_true_neg =
        wavg(into.mean_sim_true_neg, n_into_t, other.mean_sim_true_neg, n_other_t);
    into.mean_sim_false_neg =
        wavg(into.mean_sim_false_neg, n_into_f, other.mean_sim_false_neg, n_other_f);
}

/// Shared state and per-step logic for both training schedules.
struct Trainer {
    const TrainConfig& cfg;
    Model model;
    AdamState adam;
    PosteriorStore store;
    int fit_count = 0;
    int fit_attempts = 0;
    bool fell_back = false;
    PosteriorEval eval_mode;
    RngStream aug_root, sampling_root, mix_root;
    std::vector<std::string> warnings;
    bool warned_pool_clamp = false;

    Trainer(const TrainConfig& c, int feature_dim, PosteriorEval eval)
        : cfg(c),
          eval_mode(eval),
          aug_root(c.seed, "augmentation"),
          sampling_root(c.seed, "sampling"),
          mix_root(c.seed, "mix") {
        RngStream init_rng(c.seed, "init");
        model = make_model(c.encoder, c.activation, feature_dim, c.hidden_dim, init_rng);
    }

    bool want_fit(int epoch) const {
        return cfg.mode != Mode::Base && !cfg.uniform_weight_hook && !fell_back &&
               !store.fitted() && epoch >= cfg.fit_epoch;
    }

    /// Samples M' raw inter-view similarities per anchor and fits the mixture.
    /// Throws std::invalid_argument on a degenerate (all-equal) range.
    void fit(const Eigen::MatrixXd& s_raw, int epoch, std::uint64_t rng_index) {
        const int n = static_cast<int>(s_raw.rows());
        RngStream rng = sampling_root.child("fit", rng_index);
        const int per_anchor = std::min(cfg.m_prime, n - 1);
        std::vector<double> raw;
        raw.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(per_anchor));
        for (int i = 0; i < n; ++i)
            for (int k : rng.sample_without_replacement(n, per_anchor, i))
                raw.push_back(s_raw(i, k));
        SimilaritySample sample = normalize_minmax(raw);  // throws on degenerate range
        if (cfg.mixture == MixtureKind::Bmm)
            store.bmm = em_fit_bmm(sample, cfg.w_init, cfg.em_iters);
        else
            store.gmm = em_fit_gmm(sample, cfg.w_init, cfg.em_iters);
        store.captured_epoch = epoch;
        ++fit_count;
    }

    double frozen_min() const { return store.bmm ? store.bmm->norm_min : store.gmm->norm_min; }
    double frozen_max() const { return store.bmm ? store.bmm->norm_max : store.gmm->norm_max; }

    /// Applies the frozen Min-Max frame to every off-diagonal similarity.
    Eigen::MatrixXd normalize_matrix(const Eigen::MatrixXd& s_raw) {
        const auto n = s_raw.rows();
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index k = 0; k < n; ++k)
                if (i != k)
                    out(i, k) = apply_minmax(s_raw(i, k), frozen_min(), frozen_max(),
                                             &store.norm_clamp_count);
        return out;
    }

    Eigen::MatrixXd posterior_matrix_from(const Eigen::MatrixXd& s_hat) const {
        const auto n = s_hat.rows();
        Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index k = 0; k < n; ++k)
                if (i != k) p(i, k) = store.posterior_at(s_hat(i, k));
        return p;
    }

    TensorPtr weighted_loss(const PairSims& sims, const Eigen::MatrixXd& s_hat,
                            const Eigen::MatrixXd& posterior) {
        WeightMatrix w_uv = compute_weights(s_hat, posterior);
        WeightMatrix w_vu = compute_weights(s_hat.transpose(), posterior.transpose());
        return loss_weighted(sims, w_uv, w_vu);
    }

    TensorPtr mix_loss(const PairSims& sims, const TensorPtr& u, const TensorPtr& v,
                       const Eigen::MatrixXd& s_hat, const Eigen::MatrixXd& posterior,
                       std::uint64_t rng_index) {
        const int n = sims.n();
        int n_prime = cfg.n_prime;
        if (n_prime > n - 1) {
            n_prime = n - 1;
            if (!warned_pool_clamp) {
                warnings.push_back("N' exceeds available negatives; clamped to n-1");
                warned_pool_clamp = true;
            }
        }
        const Eigen::MatrixXd hardness_uv = posterior.cwiseProduct(s_hat);
        const Eigen::MatrixXd post_t = posterior.transpose();
        const Eigen::MatrixXd hardness_vu = post_t.cwiseProduct(s_hat.transpose());
        RngStream rng_uv = mix_root.child("uv", rng_index);
        RngStream rng_vu = mix_root.child("vu", rng_index);
        std::vector<SyntheticNegatives> synth_uv, synth_vu;
        synth_uv.reserve(static_cast<std::size_t>(n));
        synth_vu.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            synth_uv.push_back(synthesize_negatives(i, hardness_uv.row(i).transpose(),
                                                    posterior.row(i).transpose(), n_prime,
                                                    cfg.num_synthetic, rng_uv));
            synth_vu.push_back(synthesize_negatives(i, hardness_vu.row(i).transpose(),
                                                    post_t.row(i).transpose(), n_prime,
                                                    cfg.num_synthetic, rng_vu));
        }
        return loss_mix(sims, u, v, model.projection, synth_uv, synth_vu);
    }
};

std::vector<char> probe_mask_from_indices(std::size_t n, const std::vector<int>& idx) {
    std::vector<char> mask(n, 0);
    for (int i : idx) mask[static_cast<std::size_t>(i)] = 1;
    return mask;
}

}  // namespace

TrainResult train_transductive(const Graph& g, const TrainConfig& cfg) {
    cfg.validate();
    TrainResult result;
    PosteriorEval eval = cfg.posterior_eval;
    if (eval == PosteriorEval::FrozenMatrix && g.n_nodes > cfg.frozen_matrix_max_nodes) {
        eval = PosteriorEval::FrozenModel;
        result.warnings.push_back(
            "frozen-matrix posterior storage refused above " +
            std::to_string(cfg.frozen_matrix_max_nodes) + " nodes; using frozen-model");
    }
    Trainer tr(cfg, g.feature_dim(), eval);
    auto params = tr.model.parameters();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        RngStream rng1 = tr.aug_root.child("view1", static_cast<std::uint64_t>(epoch));
        RngStream rng2 = tr.aug_root.child("view2", static_cast<std::uint64_t>(epoch));
        Graph g1 = augment(g, cfg.augment.p_edge_drop_1, cfg.augment.p_feat_mask_1, rng1,
                           cfg.augment.mask_mode);
        Graph g2 = augment(g, cfg.augment.p_edge_drop_2, cfg.augment.p_feat_mask_2, rng2,
                           cfg.augment.mask_mode);
        TensorPtr u = forward_encoder(g1, tr.model.encoder);
        TensorPtr v = forward_encoder(g2, tr.model.encoder);
        PairSims sims = pair_similarities(u, v, tr.model.projection, cfg.tau);
        const Eigen::MatrixXd s_raw = sims.inter->val;

        EpochRecord rec;
        rec.epoch = epoch;

        if (tr.want_fit(epoch)) {
            ++tr.fit_attempts;
            try {
                tr.fit(s_raw, epoch, static_cast<std::uint64_t>(epoch));
                if (eval == PosteriorEval::FrozenMatrix)
                    tr.store.posterior = tr.posterior_matrix_from(tr.normalize_matrix(s_raw));
                tr.store.checksum = tr.store.compute_checksum();
                rec.fit_event = true;
            } catch (const std::invalid_argument&) {
                if (tr.fit_attempts >= 4) {
                    tr.fell_back = true;
                    result.warnings.push_back(
                        "similarity range stayed degenerate after 3 retries; "
                        "falling back to mode=base");
                }
            }
        }

        TensorPtr loss;
        const bool use_mixture_objective =
            cfg.mode != Mode::Base && !tr.fell_back &&
            (tr.store.fitted() || cfg.uniform_weight_hook) && epoch >= cfg.fit_epoch;
        if (use_mixture_objective && cfg.uniform_weight_hook) {
            const int n = sims.n();
            WeightMatrix ones;
            ones.w = Eigen::MatrixXd::Ones(n, n);
            ones.w.diagonal().setZero();
            loss = loss_weighted(sims, ones, ones);
            rec.mode_used = Mode::Weight;
        } else if (use_mixture_objective) {
            const Eigen::MatrixXd s_hat = tr.normalize_matrix(s_raw);
            const Eigen::MatrixXd posterior = eval == PosteriorEval::FrozenMatrix
                                                  ? tr.store.posterior
                                                  : tr.posterior_matrix_from(s_hat);
            if (cfg.mode == Mode::Weight) {
                loss = tr.weighted_loss(sims, s_hat, posterior);
                rec.mode_used = Mode::Weight;
            } else {
                loss = tr.mix_loss(sims, u, v, s_hat, posterior,
                                   static_cast<std::uint64_t>(epoch));
                rec.mode_used = Mode::Mix;
            }
        } else {
            loss = loss_infonce(sims);
            rec.mode_used = Mode::Base;
        }

        rec.loss = loss->scalar();
        backward(loss);
        adam_step(params, tr.adam, cfg.lr, cfg.weight_decay);

        if (tr.store.fitted() && !rec.fit_event &&
            tr.store.compute_checksum() != tr.store.checksum)
            throw std::logic_error("posterior store mutated after the fitting epoch");

        if (g.labels) result.histograms.push_back(make_similarity_histogram(epoch, s_raw, *g.labels));
        rec.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        result.epochs.push_back(rec);
    }

    result.model = tr.model;
    result.store = std::move(tr.store);
    result.fit_count = tr.fit_count;
    result.fell_back_to_base = tr.fell_back;
    for (auto& w : tr.warnings) result.warnings.push_back(w);
    result.final_embeddings = forward_encoder(g, result.model.encoder)->val;
    if (g.labels) {
        RngStream probe_rng(cfg.seed, "probe");
        result.probe = linear_probe(result.final_embeddings, *g.labels, cfg.probe_l2,
                                    cfg.probe_runs, cfg.probe_train_frac, probe_rng);
    }
    return result;
}

SampledSubgraph sample_subgraph(const Graph& g, const std::vector<int>& seeds,
                                const std::vector<int>& fanouts, RngStream& rng) {
    std::set<int> node_set(seeds.begin(), seeds.end());
    std::set<std::pair<int, int>> edge_set;
    std::vector<int> frontier = seeds;
    for (int fanout : fanouts) {
        std::vector<int> next;
        for (int v : frontier) {
            const int deg = g.degree[static_cast<std::size_t>(v)];
            if (deg == 0) continue;
            if (fanout == 0) {
                for (const int* p = g.neighbors_begin(v); p != g.neighbors_end(v); ++p) {
                    edge_set.emplace(std::min(v, *p), std::max(v, *p));
                    if (node_set.insert(*p).second) next.push_back(*p);
                }
            } else {
                for (int t = 0; t < fanout; ++t) {  // with replacement
                    const int u = *(g.neighbors_begin(v) +
                                    rng.uniform_int(0, deg - 1));
                    edge_set.emplace(std::min(v, u), std::max(v, u));
                    if (node_set.insert(u).second) next.push_back(u);
                }
            }
        }
        frontier = std::move(next);
    }

    SampledSubgraph sub;
    sub.node_ids.assign(node_set.begin(), node_set.end());  // sorted
    std::vector<int> local(static_cast<std::size_t>(g.n_nodes), -1);
    for (std::size_t i = 0; i < sub.node_ids.size(); ++i)
        local[static_cast<std::size_t>(sub.node_ids[i])] = static_cast<int>(i);
    std::vector<std::pair<int, int>> edges;
    edges.reserve(edge_set.size());
    for (auto [a, b] : edge_set)
        edges.emplace_back(local[static_cast<std::size_t>(a)], local[static_cast<std::size_t>(b)]);
    Eigen::MatrixXd feats(static_cast<int>(sub.node_ids.size()), g.features.cols());
    for (std::size_t i = 0; i < sub.node_ids.size(); ++i)
        feats.row(static_cast<int>(i)) = g.features.row(sub.node_ids[i]);
    std::optional<std::vector<int>> labels;
    if (g.labels) {
        labels.emplace();
        labels->reserve(sub.node_ids.size());
        for (int id : sub.node_ids) labels->push_back((*g.labels)[static_cast<std::size_t>(id)]);
    }
    sub.graph = build_graph(edges, std::move(feats), std::move(labels));
    sub.seed_local.reserve(seeds.size());
    for (int s : seeds) sub.seed_local.push_back(local[static_cast<std::size_t>(s)]);
    return sub;
}

TrainResult train_inductive(const Graph& g, const TrainConfig& cfg) {
    cfg.validate();
    if (cfg.batch_size > g.n_nodes)
        throw std::invalid_argument("train_inductive: batch_size exceeds node count");
    TrainResult result;
    PosteriorEval eval = cfg.posterior_eval;
    if (cfg.inductive_negatives == InductiveNegatives::AllSubgraphNodes &&
        eval == PosteriorEval::FrozenMatrix) {
        // Sampled node sets drift across epochs, so stored matrices cannot
        // stay aligned; only the frozen model applies.
        eval = PosteriorEval::FrozenModel;
        result.warnings.push_back(
            "all-subgraph-nodes negatives require frozen-model posterior evaluation");
    }
    Trainer tr(cfg, g.feature_dim(), eval);
    auto params = tr.model.parameters();

    // Fixed batch partition: one seeded shuffle, chunked, each chunk sorted.
    std::vector<int> order(static_cast<std::size_t>(g.n_nodes));
    for (int i = 0; i < g.n_nodes; ++i) order[static_cast<std::size_t>(i)] = i;
    RngStream batch_rng(cfg.seed, "batching");
    batch_rng.shuffle(order);
    std::vector<std::vector<int>> batches;
    for (int start = 0; start < g.n_nodes; start += cfg.batch_size) {
        const int end = std::min(g.n_nodes, start + cfg.batch_size);
        std::vector<int> b(order.begin() + start, order.begin() + end);
        std::sort(b.begin(), b.end());
        batches.push_back(std::move(b));
    }
    const auto n_batches = batches.size();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        double epoch_loss = 0.0;
        bool fit_event = false;
        Mode mode_used = Mode::Base;
        std::optional<SimilarityHistogram> epoch_hist;
        bool fit_failed_this_epoch = false;

        for (std::size_t k = 0; k < n_batches; ++k) {
            const std::uint64_t step =
                static_cast<std::uint64_t>(epoch) * n_batches + k;
            // Internal consistency: the partition must never drift.
            if (static_cast<int>(batches[k].size()) >
                cfg.batch_size)
                throw std::logic_error("batch partition drifted");

            RngStream sub_rng = tr.sampling_root.child("subgraph", step);
            SampledSubgraph sub = sample_subgraph(g, batches[k], cfg.fanouts, sub_rng);
            RngStream rng1 = tr.aug_root.child("view1", step);
            RngStream rng2 = tr.aug_root.child("view2", step);
            Graph g1 = augment(sub.graph, cfg.augment.p_edge_drop_1, cfg.augment.p_feat_mask_1,
                               rng1, cfg.augment.mask_mode);
            Graph g2 = augment(sub.graph, cfg.augment.p_edge_drop_2, cfg.augment.p_feat_mask_2,
                               rng2, cfg.augment.mask_mode);
            TensorPtr u_full = forward_encoder(g1, tr.model.encoder);
            TensorPtr v_full = forward_encoder(g2, tr.model.encoder);
            TensorPtr u = u_full, v = v_full;
            std::vector<int> loss_nodes_local;
            if (cfg.inductive_negatives == InductiveNegatives::SeedsOnly) {
                u = gather_rows(u_full, sub.seed_local);
                v = gather_rows(v_full, sub.seed_local);
                loss_nodes_local = sub.seed_local;
            } else {
                loss_nodes_local.resize(sub.node_ids.size());
                for (std::size_t i = 0; i < sub.node_ids.size(); ++i)
                    loss_nodes_local[i] = static_cast<int>(i);
            }
            PairSims sims = pair_similarities(u, v, tr.model.projection, cfg.tau);
            const Eigen::MatrixXd s_raw = sims.inter->val;

            if (k == 0 && tr.want_fit(epoch)) {
                ++tr.fit_attempts;
                try {
                    tr.fit(s_raw, epoch, step);
                    fit_event = true;
                } catch (const std::invalid_argument&) {
                    fit_failed_this_epoch = true;
                    if (tr.fit_attempts >= 4) {
                        tr.fell_back = true;
                        result.warnings.push_back(
                            "similarity range stayed degenerate after 3 retries; "
                            "falling back to mode=base");
                    }
                }
            }

            const bool fitted_now = tr.store.fitted() && !fit_failed_this_epoch;
            const bool use_mixture_objective =
                cfg.mode != Mode::Base && !tr.fell_back &&
                (fitted_now || cfg.uniform_weight_hook) && epoch >= cfg.fit_epoch;

            // At the fitting epoch, capture this batch's posterior matrix.
            if (fit_event && eval == PosteriorEval::FrozenMatrix &&
                static_cast<int>(tr.store.per_batch.size()) == static_cast<int>(k)) {
                tr.store.per_batch.push_back(
                    tr.posterior_matrix_from(tr.normalize_matrix(s_raw)));
                if (k + 1 == n_batches) tr.store.checksum = tr.store.compute_checksum();
            }

            TensorPtr loss;
            if (use_mixture_objective && cfg.uniform_weight_hook) {
                const int n = sims.n();
                WeightMatrix ones;
                ones.w = Eigen::MatrixXd::Ones(n, n);
                ones.w.diagonal().setZero();
                loss = loss_weighted(sims, ones, ones);
                mode_used = Mode::Weight;
            } else if (use_mixture_objective) {
                const Eigen::MatrixXd s_hat = tr.normalize_matrix(s_raw);
                Eigen::MatrixXd posterior;
                if (eval == PosteriorEval::FrozenMatrix) {
                    posterior = tr.store.per_batch[k];
                    if (posterior.rows() != s_hat.rows())
                        throw std::logic_error("stored posterior misaligned with batch");
                } else {
                    posterior = tr.posterior_matrix_from(s_hat);
                }
                if (cfg.mode == Mode::Weight) {
                    loss = tr.weighted_loss(sims, s_hat, posterior);
                    mode_used = Mode::Weight;
                } else {
                    loss = tr.mix_loss(sims, u, v, s_hat, posterior, step);
                    mode_used = Mode::Mix;
                }
            } else {
                loss = loss_infonce(sims);
                if (k == 0) mode_used = Mode::Base;
            }

            epoch_loss += loss->scalar();
            backward(loss);
            adam_step(params, tr.adam, cfg.lr, cfg.weight_decay);

            if (g.labels) {
                std::vector<int> batch_labels;
                batch_labels.reserve(loss_nodes_local.size());
                for (int li : loss_nodes_local)
                    batch_labels.push_back((*sub.graph.labels)[static_cast<std::size_t>(li)]);
                SimilarityHistogram h = make_similarity_histogram(epoch, s_raw, batch_labels);
                if (!epoch_hist)
                    epoch_hist = std::move(h);
                else
                    merge_histograms(*epoch_hist, h);
            }
        }

        if (tr.store.fitted() && !fit_event && eval == PosteriorEval::FrozenMatrix &&
            tr.store.compute_checksum() != tr.store.checksum)
            throw std::logic_error("posterior store mutated after the fitting epoch");

        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss = epoch_loss / static_cast<double>(n_batches);
        rec.mode_used = mode_used;
        rec.fit_event = fit_event;
        rec.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        result.epochs.push_back(rec);
        if (epoch_hist) result.histograms.push_back(std::move(*epoch_hist));
    }

    result.model = tr.model;
    result.store = std::move(tr.store);
    result.fit_count = tr.fit_count;
    result.fell_back_to_base = tr.fell_back;
    for (auto& w : tr.warnings) result.warnings.push_back(w);
    result.final_embeddings = forward_encoder(g, result.model.encoder)->val;
    if (g.labels) {
        RngStream probe_rng(cfg.seed, "probe");
        result.probe = linear_probe(result.final_embeddings, *g.labels, cfg.probe_l2,
                                    cfg.probe_runs, cfg.probe_train_frac, probe_rng);
    }
    return result;
}

// ----------------------------------------------------------------------------
// linear probe

namespace {

struct SoftmaxLoss {
    double value = 0.0;
    Eigen::MatrixXd grad_w;
    Eigen::RowVectorXd grad_b;
};

SoftmaxLoss softmax_objective(const Eigen::MatrixXd& x, const std::vector<int>& y,
                              const Eigen::MatrixXd& w, const Eigen::RowVectorXd& b,
                              double l2) {
    const auto n = x.rows();
    const auto c = w.cols();
    Eigen::MatrixXd logits = x * w;
    logits.rowwise() += b;
    double nll = 0.0;
    Eigen::MatrixXd probs(n, c);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mx = logits.row(i).maxCoeff();
        const Eigen::RowVectorXd e = (logits.row(i).array() - mx).exp();
        const double z = e.sum();
        probs.row(i) = e / z;
        nll -= logits(i, y[static_cast<std::size_t>(i)]) - mx - std::log(z);
    }
    nll /= static_cast<double>(n);
    Eigen::MatrixXd delta = probs;
    for (Eigen::Index i = 0; i < n; ++i) delta(i, y[static_cast<std::size_t>(i)]) -= 1.0;
    delta /= static_cast<double>(n);

    SoftmaxLoss out;
    out.value = nll + 0.5 * l2 * w.squaredNorm();
    out.grad_w = x.transpose() * delta + l2 * w;
    out.grad_b = delta.colwise().sum();
    return out;
}

}  // namespace

ProbeRun probe_single(const Eigen::MatrixXd& embeddings, const std::vector<int>& labels,
                      const std::vector<char>& train_mask, double l2, RngStream& rng) {
    if (labels.size() != static_cast<std::size_t>(embeddings.rows()) ||
        train_mask.size() != labels.size())
        throw std::invalid_argument("probe_single: size mismatch");
    const int n_classes = *std::max_element(labels.begin(), labels.end()) + 1;

    std::vector<int> train_idx, test_idx;
    for (std::size_t i = 0; i < train_mask.size(); ++i)
        (train_mask[i] ? train_idx : test_idx).push_back(static_cast<int>(i));
    if (train_idx.empty() || test_idx.empty())
        throw std::invalid_argument("probe_single: empty train or test split");
    std::set<int> train_classes;
    for (int i : train_idx) train_classes.insert(labels[static_cast<std::size_t>(i)]);
    if (train_classes.size() < 2)
        throw std::invalid_argument("probe_single: training split covers a single class");

    Eigen::MatrixXd x_tr(static_cast<int>(train_idx.size()), embeddings.cols());
    std::vector<int> y_tr;
    y_tr.reserve(train_idx.size());
    for (std::size_t r = 0; r < train_idx.size(); ++r) {
        x_tr.row(static_cast<int>(r)) = embeddings.row(train_idx[r]);
        y_tr.push_back(labels[static_cast<std::size_t>(train_idx[r])]);
    }

    Eigen::MatrixXd w(embeddings.cols(), n_classes);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = 0.01 * rng.normal();
    Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(n_classes);

    // Full-batch gradient descent with backtracking; stops at grad-norm
    // < 1e-5 or 1e4 steps.
    double step = 1.0;
    SoftmaxLoss cur = softmax_objective(x_tr, y_tr, w, b, l2);
    for (int it = 0; it < 10000; ++it) {
        const double gnorm =
            std::sqrt(cur.grad_w.squaredNorm() + cur.grad_b.squaredNorm());
        if (gnorm < 1e-5) break;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            Eigen::MatrixXd w_new = w - step * cur.grad_w;
            Eigen::RowVectorXd b_new = b - step * cur.grad_b;
            SoftmaxLoss cand = softmax_objective(x_tr, y_tr, w_new, b_new, l2);
            if (cand.value <= cur.value - 1e-4 * step * gnorm * gnorm) {
                w = std::move(w_new);
                b = std::move(b_new);
                cur = std::move(cand);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // step underflow; treat as converged
        step = std::min(step * 2.0, 1e4);
    }

    long correct = 0;
    std::vector<long> tp(static_cast<std::size_t>(n_classes), 0),
        fp(static_cast<std::size_t>(n_classes), 0), fn(static_cast<std::size_t>(n_classes), 0);
    for (int i : test_idx) {
        Eigen::RowVectorXd logit = embeddings.row(i) * w + b;
        Eigen::Index pred;
        logit.maxCoeff(&pred);
        const int truth = labels[static_cast<std::size_t>(i)];
        if (static_cast<int>(pred) == truth) {
            ++correct;
            ++tp[static_cast<std::size_t>(truth)];
        } else {
            ++fp[static_cast<std::size_t>(pred)];
            ++fn[static_cast<std::size_t>(truth)];
        }
    }
    ProbeRun out;
    out.accuracy = static_cast<double>(correct) / static_cast<double>(test_idx.size());
    long tp_sum = 0, fp_sum = 0, fn_sum = 0;
    for (int c = 0; c < n_classes; ++c) {
        tp_sum += tp[static_cast<std::size_t>(c)];
        fp_sum += fp[static_cast<std::size_t>(c)];
        fn_sum += fn[static_cast<std::size_t>(c)];
    }
    const double denom = static_cast<double>(2 * tp_sum + fp_sum + fn_sum);
    out.micro_f1 = denom > 0.0 ? 2.0 * static_cast<double>(tp_sum) / denom : 0.0;
    return out;
}

ProbeResult linear_probe(const Eigen::MatrixXd& embeddings, const std::vector<int>& labels,
                         double l2, int runs, double train_frac, RngStream& rng) {
    if (runs < 1) throw std::invalid_argument("linear_probe: runs must be >= 1");
    const int n_classes = *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(n_classes));
    for (std::size_t i = 0; i < labels.size(); ++i)
        by_class[static_cast<std::size_t>(labels[i])].push_back(static_cast<int>(i));

    std::vector<double> accs, f1s;
    for (int run = 0; run < runs; ++run) {
        RngStream split_rng = rng.child("split", static_cast<std::uint64_t>(run));
        RngStream init_rng = rng.child("init", static_cast<std::uint64_t>(run));
        std::vector<int> train_idx;
        for (auto cls : by_class) {
            if (cls.empty()) continue;
            split_rng.shuffle(cls);
            const auto take = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(cls.size()))));
            for (std::size_t i = 0; i < std::min(take, cls.size()); ++i)
                train_idx.push_back(cls[i]);
        }
        const auto mask = probe_mask_from_indices(labels.size(), train_idx);
        const ProbeRun r = probe_single(embeddings, labels, mask, l2, init_rng);
        accs.push_back(r.accuracy);
        f1s.push_back(r.micro_f1);
    }
    auto mean_std = [](const std::vector<double>& xs) {
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= static_cast<double>(xs.size());
        double var = 0.0;
        for (double x : xs) var += (x - mean) * (x - mean);
        var /= static_cast<double>(xs.size());
        return std::pair{mean, std::sqrt(var)};
    };
    ProbeResult out;
    std::tie(out.acc_mean, out.acc_std) = mean_std(accs);
    std::tie(out.f1_mean, out.f1_std) = mean_std(f1s);
    out.runs = runs;
    return out;
}

Graph generate_sbm(int blocks, int nodes_per_block, double p_in, double p_out,
                   int feature_dim, double class_sep, std::uint64_t seed,
                   std::vector<std::string>* warnings) {
    if (blocks < 1 || nodes_per_block < 1)
        throw std::invalid_argument("generate_sbm: blocks and nodes_per_block must be >= 1");
    if (feature_dim < 1) throw std::invalid_argument("generate_sbm: feature_dim must be >= 1");
    if (!(p_in >= 0.0 && p_in <= 1.0 && p_out >= 0.0 && p_out <= 1.0))
        throw std::invalid_argument("generate_sbm: probabilities must be in [0,1]");
    if (p_in <= p_out && warnings)
        warnings->push_back("p_in <= p_out: blocks will not be assortative communities");

    RngStream rng(seed, "sbm");
    const int n = blocks * nodes_per_block;
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i / nodes_per_block;

    // class means: random directions scaled to class_sep
    Eigen::MatrixXd means(blocks, feature_dim);
    for (int c = 0; c < blocks; ++c) {
        Eigen::RowVectorXd dir(feature_dim);
        for (int j = 0; j < feature_dim; ++j) dir(j) = rng.normal();
        const double nn = dir.norm();
        means.row(c) = nn > 0.0 ? ((class_sep / nn) * dir).eval() : (dir * 0.0).eval();
    }
    Eigen::MatrixXd feats(n, feature_dim);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < feature_dim; ++j)
            feats(i, j) = means(labels[static_cast<std::size_t>(i)], j) + rng.normal();

    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double p =
                labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)] ? p_in
                                                                                           : p_out;
            if (rng.uniform() < p) edges.emplace_back(i, j);
        }
    }
    return build_graph(edges, std::move(feats), labels);
}

}  // namespace gcl
