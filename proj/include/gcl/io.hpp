#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "gcl/mixture.hpp"
#include "gcl/nn.hpp"
#include "gcl/training.hpp"

namespace gcl::io {

using ordered_json = nlohmann::ordered_json;

inline constexpr const char* kArtifactVersion = "0.1.0";
inline constexpr int kCheckpointVersion = 1;

std::string hash_file_hex(const std::string& path);
void ensure_dir(const std::string& dir);

ordered_json config_to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const ordered_json& j);

/// manifest.json: everything needed to reproduce the run — config snapshot,
/// input hashes, seed, artifact version, output names.
void write_manifest(const std::string& dir, const std::string& command,
                    const ordered_json& config,
                    const std::vector<std::pair<std::string, std::string>>& inputs,
                    const std::vector<std::string>& outputs);

/// JSON-lines metrics: one record per epoch plus a final probe record when
/// available. wall_ms is only written when include_wall is set, so default
/// logs are byte-identical across identically seeded runs.
void write_metrics_jsonl(const std::string& path, const TrainResult& result,
                         bool include_wall);

void write_histograms_csv(const std::string& path,
                          const std::vector<SimilarityHistogram>& hists);
void write_hist_summary_csv(const std::string& path,
                            const std::vector<SimilarityHistogram>& hists);

void save_checkpoint(const std::string& path, const Model& model, int hidden_dim);
Model load_checkpoint(const std::string& path, int* hidden_dim = nullptr);

ordered_json bmm_to_json(const BmmParams& p);
ordered_json gmm_to_json(const GmmParams& p);

/// Figure-3-style overlay: empirical histogram density plus both fitted
/// mixture densities on a shared bin grid.
void write_mixture_overlay_csv(const std::string& path, const SimilaritySample& sample,
                               const BmmParams& bmm, const GmmParams& gmm, int bins);

void write_contraction_report(const std::string& path, const ContractionReport& rep,
                              double eigvec_identity_residual);

}  // namespace gcl::io
