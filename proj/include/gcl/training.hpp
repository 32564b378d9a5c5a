#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gcl/augment.hpp"
#include "gcl/graph.hpp"
#include "gcl/mixture.hpp"
#include "gcl/nn.hpp"
#include "gcl/objectives.hpp"

namespace gcl {

enum class Mode { Base, Weight, Mix };
enum class PosteriorEval {
    FrozenMatrix,  // reuse the posterior matrix captured at the fitting epoch
    FrozenModel,   // re-evaluate the frozen mixture on current similarities
};
enum class MixtureKind { Bmm, Gmm };
enum class InductiveNegatives { SeedsOnly, AllSubgraphNodes };

Mode mode_from_string(const std::string& s);
std::string to_string(Mode m);
PosteriorEval posterior_eval_from_string(const std::string& s);
std::string to_string(PosteriorEval p);
MixtureKind mixture_from_string(const std::string& s);
std::string to_string(MixtureKind k);
InductiveNegatives inductive_negatives_from_string(const std::string& s);
std::string to_string(InductiveNegatives v);

struct TrainConfig {
    double tau = 0.4;
    double lr = 0.01;
    double weight_decay = 1e-5;
    int epochs = 200;
    int hidden_dim = 64;
    Activation activation = Activation::PRelu;
    EncoderKind encoder = EncoderKind::Gcn2;

    Mode mode = Mode::Base;
    int fit_epoch = 100;    // E: epoch at which the mixture is fitted
    double w_init = 0.05;   // initial false-negative component weight
    int em_iters = 10;      // I
    int m_prime = 100;      // M': similarities sampled per anchor
    int n_prime = 10;       // N': hard-negative pool size (mix)
    int num_synthetic = 5;  // m: synthetic negatives per anchor (mix)
    MixtureKind mixture = MixtureKind::Bmm;
    PosteriorEval posterior_eval = PosteriorEval::FrozenMatrix;

    AugmentConfig augment;

    bool inductive = false;
    int batch_size = 256;
    std::vector<int> fanouts = {10, 10, 25};  // 0 entry means take all neighbors
    InductiveNegatives inductive_negatives = InductiveNegatives::SeedsOnly;

    double probe_l2 = 1e-4;
    int probe_runs = 20;
    double probe_train_frac = 0.1;

    std::uint64_t seed = 1;

    /// Test hook: force every hardness weight to 1 at epochs >= E (weight
    /// mode only). The mixture fit is skipped; the loss must then match the
    /// base objective.
    bool uniform_weight_hook = false;

    /// FrozenMatrix storage is O(n^2); above this many nodes it is refused
    /// and the run switches to FrozenModel.
    int frozen_matrix_max_nodes = 5000;

    void validate() const;  // throws std::invalid_argument
};

struct EpochRecord {
    int epoch = 0;
    double loss = 0.0;
    Mode mode_used = Mode::Base;  // objective actually applied this epoch
    bool fit_event = false;
    double wall_ms = 0.0;
};

/// Per-epoch inter-view similarity histogram split by ground-truth pair type
/// (true negative = classes differ). Bin counts sum to n*(n-1).
struct SimilarityHistogram {
    int epoch = 0;
    double bin_lo = -1.0;
    double bin_hi = 1.0;
    std::vector<long> true_neg_counts;
    std::vector<long> false_neg_counts;
    double mean_sim_true_neg = 0.0;
    double mean_sim_false_neg = 0.0;
};

/// Posteriors captured once at the fitting epoch and immutable afterwards.
struct PosteriorStore {
    std::optional<BmmParams> bmm;
    std::optional<GmmParams> gmm;
    Eigen::MatrixXd posterior;                // transductive: n x n
    std::vector<Eigen::MatrixXd> per_batch;   // inductive: one matrix per batch
    int captured_epoch = -1;
    long norm_clamp_count = 0;  // later-epoch similarities outside the frozen frame
    std::uint64_t checksum = 0;

    bool fitted() const { return captured_epoch >= 0; }
    double posterior_at(double s_normalized) const;
    std::uint64_t compute_checksum() const;
};

struct ProbeResult {
    double acc_mean = 0.0;
    double acc_std = 0.0;
    double f1_mean = 0.0;
    double f1_std = 0.0;
    int runs = 0;
};

struct TrainResult {
    Model model;
    std::vector<EpochRecord> epochs;
    std::vector<SimilarityHistogram> histograms;  // only when labels present
    PosteriorStore store;
    int fit_count = 0;
    bool fell_back_to_base = false;
    std::vector<std::string> warnings;
    std::optional<ProbeResult> probe;
    Eigen::MatrixXd final_embeddings;  // f(X, A) on the un-augmented graph

    std::vector<double> loss_sequence() const;
};

/// Full-graph training: two stochastic views per epoch, InfoNCE before the
/// fitting epoch, mixture fit + posterior freeze at epoch E, weighted or
/// mix objective afterwards, Adam updates throughout. A degenerate
/// similarity range at E retries at the next epoch (3 retries) and then
/// falls back to the base objective with a warning.
TrainResult train_transductive(const Graph& g, const TrainConfig& cfg);

/// Minibatch training over fanout-sampled subgraphs. The node partition into
/// batches is fixed once (seeded) so the posterior matrices stored at epoch E
/// stay aligned with batch indices across epochs.
TrainResult train_inductive(const Graph& g, const TrainConfig& cfg);

/// Fanout-sampled neighborhood subgraph; exposed for tests.
struct SampledSubgraph {
    Graph graph;                 // nodes sorted by original id
    std::vector<int> node_ids;   // local -> original
    std::vector<int> seed_local; // positions of the seed nodes
};
SampledSubgraph sample_subgraph(const Graph& g, const std::vector<int>& seeds,
                                const std::vector<int>& fanouts, RngStream& rng);

struct ProbeRun {
    double accuracy = 0.0;
    double micro_f1 = 0.0;
};

/// One l2-regularized multinomial logistic regression fit by full-batch
/// gradient descent (backtracking line search, grad-norm < 1e-5 or 1e4
/// steps). Throws if the training mask covers a single class.
ProbeRun probe_single(const Eigen::MatrixXd& embeddings, const std::vector<int>& labels,
                      const std::vector<char>& train_mask, double l2, RngStream& rng);

/// mean +- std over `runs` stratified random splits and initializations.
ProbeResult linear_probe(const Eigen::MatrixXd& embeddings, const std::vector<int>& labels,
                         double l2, int runs, double train_frac, RngStream& rng);

/// Stochastic block model with Gaussian features around per-class means of
/// norm class_sep. Labels are block ids.
Graph generate_sbm(int blocks, int nodes_per_block, double p_in, double p_out,
                   int feature_dim, double class_sep, std::uint64_t seed,
                   std::vector<std::string>* warnings = nullptr);

/// Histogram of inter-view similarities split by pair type; 40 bins on [-1,1].
SimilarityHistogram make_similarity_histogram(int epoch, const Eigen::MatrixXd& inter_sims,
                                              const std::vector<int>& labels, int bins = 40);

}  // namespace gcl
