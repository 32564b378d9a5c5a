#include "gcl/io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "gcl/rng.hpp"

namespace gcl::io {

namespace fs = std::filesystem;

std::string hash_file_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for hashing: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string bytes = ss.str();
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    return std::string(buf);
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create directory " + dir + ": " + ec.message());
}

ordered_json config_to_json(const TrainConfig& cfg) {
    ordered_json j;
    j["tau"] = cfg.tau;
    j["lr"] = cfg.lr;
    j["weight_decay"] = cfg.weight_decay;
    j["epochs"] = cfg.epochs;
    j["hidden_dim"] = cfg.hidden_dim;
    j["activation"] = to_string(cfg.activation);
    j["encoder"] = to_string(cfg.encoder);
    j["mode"] = to_string(cfg.mode);
    j["fit_epoch"] = cfg.fit_epoch;
    j["w_init"] = cfg.w_init;
    j["em_iters"] = cfg.em_iters;
    j["m_prime"] = cfg.m_prime;
    j["n_prime"] = cfg.n_prime;
    j["num_synthetic"] = cfg.num_synthetic;
    j["mixture"] = to_string(cfg.mixture);
    j["posterior_eval"] = to_string(cfg.posterior_eval);
    j["p_edge_1"] = cfg.augment.p_edge_drop_1;
    j["p_edge_2"] = cfg.augment.p_edge_drop_2;
    j["p_feat_1"] = cfg.augment.p_feat_mask_1;
    j["p_feat_2"] = cfg.augment.p_feat_mask_2;
    j["feat_mask_mode"] =
        cfg.augment.mask_mode == FeatureMaskMode::Columns ? "columns" : "entries";
    j["inductive"] = cfg.inductive;
    j["batch_size"] = cfg.batch_size;
    j["fanouts"] = cfg.fanouts;
    j["inductive_negatives"] = to_string(cfg.inductive_negatives);
    j["probe_l2"] = cfg.probe_l2;
    j["probe_runs"] = cfg.probe_runs;
    j["probe_train_frac"] = cfg.probe_train_frac;
    j["seed"] = cfg.seed;
    return j;
}

TrainConfig config_from_json(const ordered_json& j) {
    TrainConfig cfg;
    cfg.tau = j.at("tau").get<double>();
    cfg.lr = j.at("lr").get<double>();
    cfg.weight_decay = j.at("weight_decay").get<double>();
    cfg.epochs = j.at("epochs").get<int>();
    cfg.hidden_dim = j.at("hidden_dim").get<int>();
    cfg.activation = activation_from_string(j.at("activation").get<std::string>());
    cfg.encoder = encoder_from_string(j.at("encoder").get<std::string>());
    cfg.mode = mode_from_string(j.at("mode").get<std::string>());
    cfg.fit_epoch = j.at("fit_epoch").get<int>();
    cfg.w_init = j.at("w_init").get<double>();
    cfg.em_iters = j.at("em_iters").get<int>();
    cfg.m_prime = j.at("m_prime").get<int>();
    cfg.n_prime = j.at("n_prime").get<int>();
    cfg.num_synthetic = j.at("num_synthetic").get<int>();
    cfg.mixture = mixture_from_string(j.at("mixture").get<std::string>());
    cfg.posterior_eval = posterior_eval_from_string(j.at("posterior_eval").get<std::string>());
    cfg.augment.p_edge_drop_1 = j.at("p_edge_1").get<double>();
    cfg.augment.p_edge_drop_2 = j.at("p_edge_2").get<double>();
    cfg.augment.p_feat_mask_1 = j.at("p_feat_1").get<double>();
    cfg.augment.p_feat_mask_2 = j.at("p_feat_2").get<double>();
    cfg.augment.mask_mode = j.at("feat_mask_mode").get<std::string>() == "entries"
                                ? FeatureMaskMode::Entries
                                : FeatureMaskMode::Columns;
    cfg.inductive = j.at("inductive").get<bool>();
    cfg.batch_size = j.at("batch_size").get<int>();
    cfg.fanouts = j.at("fanouts").get<std::vector<int>>();
    cfg.inductive_negatives =
        inductive_negatives_from_string(j.at("inductive_negatives").get<std::string>());
    cfg.probe_l2 = j.at("probe_l2").get<double>();
    cfg.probe_runs = j.at("probe_runs").get<int>();
    cfg.probe_train_frac = j.at("probe_train_frac").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
}

void write_manifest(const std::string& dir, const std::string& command,
                    const ordered_json& config,
                    const std::vector<std::pair<std::string, std::string>>& inputs,
                    const std::vector<std::string>& outputs) {
    ordered_json j;
    j["artifact_version"] = kArtifactVersion;
    j["command"] = command;
    j["config"] = config;
    ordered_json in = ordered_json::object();
    for (const auto& [path, hash] : inputs) in[path] = hash;
    j["input_hashes"] = in;
    j["outputs"] = outputs;
    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw std::runtime_error("cannot write manifest in " + dir);
    out << j.dump(2) << "\n";
}

void write_metrics_jsonl(const std::string& path, const TrainResult& result,
                         bool include_wall) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write metrics: " + path);
    for (const auto& e : result.epochs) {
        ordered_json j;
        j["epoch"] = e.epoch;
        j["loss"] = e.loss;
        j["mode"] = to_string(e.mode_used);
        if (e.fit_event) j["fit_event"] = true;
        if (include_wall) j["wall_ms"] = e.wall_ms;
        out << j.dump() << "\n";
    }
    if (result.probe) {
        ordered_json j;
        j["probe_acc_mean"] = result.probe->acc_mean;
        j["probe_acc_std"] = result.probe->acc_std;
        j["probe_f1_mean"] = result.probe->f1_mean;
        out << j.dump() << "\n";
    }
}

void write_histograms_csv(const std::string& path,
                          const std::vector<SimilarityHistogram>& hists) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write histograms: " + path);
    out << "epoch,bin_center,true_neg_count,false_neg_count\n";
    out.precision(17);
    for (const auto& h : hists) {
        const auto bins = h.true_neg_counts.size();
        const double width = (h.bin_hi - h.bin_lo) / static_cast<double>(bins);
        for (std::size_t b = 0; b < bins; ++b) {
            const double center = h.bin_lo + (static_cast<double>(b) + 0.5) * width;
            out << h.epoch << "," << center << "," << h.true_neg_counts[b] << ","
                << h.false_neg_counts[b] << "\n";
        }
    }
}

void write_hist_summary_csv(const std::string& path,
                            const std::vector<SimilarityHistogram>& hists) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write histogram summary: " + path);
    out << "epoch,mean_sim_true_neg,mean_sim_false_neg\n";
    out.precision(17);
    for (const auto& h : hists)
        out << h.epoch << "," << h.mean_sim_true_neg << "," << h.mean_sim_false_neg << "\n";
}

namespace {

ordered_json tensor_to_json(const TensorPtr& t) {
    ordered_json j;
    j["shape"] = {t->rows(), t->cols()};
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(t->val.size()));
    for (int i = 0; i < t->rows(); ++i)
        for (int c = 0; c < t->cols(); ++c) values.push_back(t->val(i, c));  // row-major
    j["values"] = values;
    return j;
}

Eigen::MatrixXd tensor_from_json(const ordered_json& j) {
    const auto shape = j.at("shape").get<std::vector<int>>();
    const auto values = j.at("values").get<std::vector<double>>();
    if (shape.size() != 2 ||
        static_cast<std::size_t>(shape[0]) * static_cast<std::size_t>(shape[1]) != values.size())
        throw std::runtime_error("checkpoint: bad tensor shape");
    Eigen::MatrixXd m(shape[0], shape[1]);
    std::size_t idx = 0;
    for (int i = 0; i < shape[0]; ++i)
        for (int c = 0; c < shape[1]; ++c) m(i, c) = values[idx++];
    return m;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, int hidden_dim) {
    ordered_json j;
    j["version"] = kCheckpointVersion;
    j["encoder_kind"] = to_string(model.encoder.kind);
    j["activation"] = to_string(model.encoder.activation);
    j["hidden_dim"] = hidden_dim;
    ordered_json layers = ordered_json::object();
    for (std::size_t i = 0; i < model.encoder.weights.size(); ++i)
        layers["encoder.w" + std::to_string(i)] = tensor_to_json(model.encoder.weights[i]);
    for (std::size_t i = 0; i < model.encoder.prelu_slopes.size(); ++i)
        layers["encoder.prelu" + std::to_string(i)] =
            tensor_to_json(model.encoder.prelu_slopes[i]);
    layers["projection.w1"] = tensor_to_json(model.projection.w1);
    layers["projection.b1"] = tensor_to_json(model.projection.b1);
    layers["projection.w2"] = tensor_to_json(model.projection.w2);
    layers["projection.b2"] = tensor_to_json(model.projection.b2);
    j["layers"] = layers;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << j.dump() << "\n";
}

Model load_checkpoint(const std::string& path, int* hidden_dim) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    ordered_json j;
    in >> j;
    if (!j.contains("version") || j.at("version").get<int>() != kCheckpointVersion)
        throw std::runtime_error("checkpoint: missing or unsupported version");
    Model m;
    m.encoder.kind = encoder_from_string(j.at("encoder_kind").get<std::string>());
    m.encoder.activation = activation_from_string(j.at("activation").get<std::string>());
    if (hidden_dim) *hidden_dim = j.at("hidden_dim").get<int>();
    const auto& layers = j.at("layers");
    for (int i = 0;; ++i) {
        const std::string key = "encoder.w" + std::to_string(i);
        if (!layers.contains(key)) break;
        m.encoder.weights.push_back(make_param(tensor_from_json(layers.at(key))));
    }
    for (int i = 0;; ++i) {
        const std::string key = "encoder.prelu" + std::to_string(i);
        if (!layers.contains(key)) break;
        m.encoder.prelu_slopes.push_back(make_param(tensor_from_json(layers.at(key))));
    }
    m.projection.w1 = make_param(tensor_from_json(layers.at("projection.w1")));
    m.projection.b1 = make_param(tensor_from_json(layers.at("projection.b1")));
    m.projection.w2 = make_param(tensor_from_json(layers.at("projection.w2")));
    m.projection.b2 = make_param(tensor_from_json(layers.at("projection.b2")));
    if (m.encoder.weights.empty()) throw std::runtime_error("checkpoint: no encoder weights");
    return m;
}

ordered_json bmm_to_json(const BmmParams& p) {
    ordered_json j;
    j["lambda"] = p.lambda;
    j["alpha"] = p.alpha;
    j["beta"] = p.beta;
    j["true_component"] = p.true_component;
    j["loglik_trace"] = p.loglik_trace;
    j["degenerate"] = p.diag.degenerate;
    j["mean_rule_verdict"] = p.diag.mean_rule_verdict;
    j["lambda_rule_verdict"] = p.diag.lambda_rule_verdict;
    j["rule_disagreement"] = p.diag.rule_disagreement;
    j["norm_min"] = p.norm_min;
    j["norm_max"] = p.norm_max;
    return j;
}

ordered_json gmm_to_json(const GmmParams& p) {
    ordered_json j;
    j["lambda"] = p.lambda;
    j["mu"] = p.mu;
    j["sigma2"] = p.sigma2;
    j["true_component"] = p.true_component;
    j["loglik_trace"] = p.loglik_trace;
    j["degenerate"] = p.diag.degenerate;
    j["mean_rule_verdict"] = p.diag.mean_rule_verdict;
    j["lambda_rule_verdict"] = p.diag.lambda_rule_verdict;
    j["rule_disagreement"] = p.diag.rule_disagreement;
    j["norm_min"] = p.norm_min;
    j["norm_max"] = p.norm_max;
    return j;
}

void write_mixture_overlay_csv(const std::string& path, const SimilaritySample& sample,
                               const BmmParams& bmm, const GmmParams& gmm, int bins) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write overlay: " + path);
    out << "bin_center,empirical_density,bmm_density,gmm_density\n";
    out.precision(17);
    std::vector<long> counts(static_cast<std::size_t>(bins), 0);
    for (double v : sample.values) {
        int b = static_cast<int>(std::floor(v * bins));
        b = std::min(bins - 1, std::max(0, b));
        ++counts[static_cast<std::size_t>(b)];
    }
    const double width = 1.0 / bins;
    const double total = static_cast<double>(sample.values.size());
    for (int b = 0; b < bins; ++b) {
        const double center = (b + 0.5) * width;
        const double emp = static_cast<double>(counts[static_cast<std::size_t>(b)]) /
                           (total * width);
        const double bmm_d = std::exp(bmm.log_pdf(center));
        const double gmm_d = std::exp(gmm.log_pdf(center));
        out << center << "," << emp << "," << bmm_d << "," << gmm_d << "\n";
    }
}

void write_contraction_report(const std::string& path, const ContractionReport& rep,
                              double eigvec_identity_residual) {
    ordered_json j;
    j["tau"] = rep.tau;
    j["connected"] = rep.connected;
    j["bipartite_input"] = rep.bipartite_input;
    j["bipartite_with_self_loops"] = rep.bipartite_with_self_loops;
    j["preconditions_met"] = rep.preconditions_met;
    j["max_pair_ratio"] = rep.max_pair_ratio;
    j["violated_pair_count"] = rep.violated_pairs.size();
    ordered_json pairs = ordered_json::array();
    const std::size_t cap = std::min<std::size_t>(rep.violated_pairs.size(), 100);
    for (std::size_t i = 0; i < cap; ++i)
        pairs.push_back({rep.violated_pairs[i].first, rep.violated_pairs[i].second});
    j["violated_pairs"] = pairs;
    j["eigvec_identity_residual"] = eigvec_identity_residual;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace gcl::io
