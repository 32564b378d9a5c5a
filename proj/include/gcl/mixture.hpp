#pragma once

#include <array>
#include <vector>

namespace gcl {

/// Similarities are clamped into [kSimClampEps, 1 - kSimClampEps] before any
/// beta density evaluation; the density diverges at {0,1} for shapes < 1.
inline constexpr double kSimClampEps = 1e-4;

/// Min-Max-normalized similarity sample. The affine parameters are kept so
/// the exact same normalization frame can be reapplied to similarities
/// observed after the fitting epoch.
struct SimilaritySample {
    std::vector<double> values;  // all in [kSimClampEps, 1 - kSimClampEps]
    double norm_min = 0.0;
    double norm_max = 1.0;
};

/// Affine map sending min(raw) -> 0 and max(raw) -> 1, then clamp.
/// Throws std::invalid_argument when all inputs are equal (degenerate range).
SimilaritySample normalize_minmax(const std::vector<double>& raw);

/// For data already on [0,1] (e.g. synthetic beta draws): clamp only,
/// identity affine parameters.
SimilaritySample sample_from_unit_values(const std::vector<double>& raw01);

/// Applies a stored Min-Max frame to a raw value; clamps into
/// [kSimClampEps, 1 - kSimClampEps] and counts values that fell outside [0,1].
double apply_minmax(double raw, double norm_min, double norm_max,
                    long* out_of_range_count = nullptr);

/// Beta density via log-gamma. Throws for s outside (0,1).
double beta_pdf(double s, double alpha, double beta);
double beta_log_pdf(double s, double alpha, double beta);

struct MixtureDiagnostics {
    bool degenerate = false;        // a clamp fired during fitting
    int mean_rule_verdict = -1;     // component index each rule picks
    int lambda_rule_verdict = -1;
    bool rule_disagreement = false;
};

struct BmmParams {
    std::array<double, 2> lambda{0.5, 0.5};
    std::array<double, 2> alpha{1.0, 1.0};
    std::array<double, 2> beta{1.0, 1.0};
    int true_component = 0;
    std::vector<double> loglik_trace;  // one entry per completed EM iteration
    MixtureDiagnostics diag;
    double norm_min = 0.0;  // frozen Min-Max frame of the fitting sample
    double norm_max = 1.0;

    double component_mean(int c) const { return alpha[c] / (alpha[c] + beta[c]); }
    double log_pdf(double s) const;  // mixture log density
};

struct GmmParams {
    std::array<double, 2> lambda{0.5, 0.5};
    std::array<double, 2> mu{0.25, 0.75};
    std::array<double, 2> sigma2{0.1, 0.1};
    int true_component = 0;
    std::vector<double> loglik_trace;
    MixtureDiagnostics diag;
    double norm_min = 0.0;
    double norm_max = 1.0;

    double component_mean(int c) const { return mu[c]; }
    double log_pdf(double s) const;
};

struct EmOptions {
    double min_improve = 1e-6;  // early stop threshold; set to -inf to force all iterations
};

/// Two-component beta mixture fitted by EM: Bayes-rule responsibilities,
/// weighted moments, shape parameters by the method of moments, mixture
/// weights from mean responsibility. Components are initialized by splitting
/// the sample at its (1 - w_init) quantile; the upper (high-similarity) side
/// starts as the false-negative component with weight w_init. An iteration
/// that would decrease the log-likelihood is rolled back, so the recorded
/// trace is non-decreasing.
BmmParams em_fit_bmm(const SimilaritySample& sample, double w_init, int iters,
                     const EmOptions& opt = {});

/// Gaussian analogue with the same initialization protocol and clamps.
GmmParams em_fit_gmm(const SimilaritySample& sample, double w_init, int iters,
                     const EmOptions& opt = {});

/// Sets true_component: primary rule is the smaller component mean; when the
/// means tie within 1e-6 the larger mixture weight wins. Both rules' verdicts
/// are stored and disagreement is flagged.
void identify_true_component(BmmParams& params);
void identify_true_component(GmmParams& params);

/// Posterior probability that a pair with normalized similarity s is a true
/// negative (Bayes quotient of the true component). Complementary posteriors
/// sum to 1.
double posterior_true(const BmmParams& params, double s);
double posterior_true(const GmmParams& params, double s);

/// Convenience: normalize a raw similarity with the frozen frame, then query.
double posterior_true_raw(const BmmParams& params, double raw,
                          long* out_of_range_count = nullptr);

}  // namespace gcl
