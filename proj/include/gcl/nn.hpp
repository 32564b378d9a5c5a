#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gcl/graph.hpp"
#include "gcl/rng.hpp"
#include "gcl/tensor.hpp"

namespace gcl {

enum class Activation { PRelu, RReluEval, Elu, Linear };
enum class EncoderKind { Gcn2, SageGcn3 };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);
EncoderKind encoder_from_string(const std::string& s);
std::string to_string(EncoderKind k);

/// RReLU is evaluated with its expected slope everywhere (mean of the
/// default [1/8, 1/3] sampling interval) so runs are reproducible and
/// finite-difference gradient checks hold.
inline constexpr double kRReluEvalSlope = (1.0 / 8.0 + 1.0 / 3.0) / 2.0;

/// Encoder weights. Layer dims chain f_dim -> F' (gcn2: W1 f x F', W2 F' x F';
/// sage_gcn3: W_i (2*d_in) x F' because each layer concatenates the mean
/// aggregate with its input).
struct EncoderParams {
    EncoderKind kind = EncoderKind::Gcn2;
    Activation activation = Activation::PRelu;
    std::vector<TensorPtr> weights;
    std::vector<TensorPtr> prelu_slopes;  // one scalar per layer when PRelu

    int input_dim() const;
    int output_dim() const;
    std::vector<TensorPtr> parameters() const;
};

/// Two-layer projection head g; output dim equals input dim.
struct ProjectionParams {
    TensorPtr w1, b1, w2, b2;
    std::vector<TensorPtr> parameters() const { return {w1, b1, w2, b2}; }
};

struct Model {
    EncoderParams encoder;
    ProjectionParams projection;
    std::vector<TensorPtr> parameters() const;
};

EncoderParams make_encoder(EncoderKind kind, Activation act, int f_dim, int hidden_dim,
                           RngStream& rng);
ProjectionParams make_projection(int dim, RngStream& rng);
Model make_model(EncoderKind kind, Activation act, int f_dim, int hidden_dim, RngStream& rng);

TensorPtr apply_activation(const TensorPtr& x, Activation act, const TensorPtr& prelu_slope);

/// f(X, A): embeds every node of g. Builds the propagation operator that the
/// encoder kind requires and runs the layer stack on g.features.
TensorPtr forward_encoder(const Graph& g, const EncoderParams& params);

TensorPtr forward_projection(const TensorPtr& h, const ProjectionParams& proj);

struct CriticStats {
    long zero_norm_count = 0;
};

/// theta(u, v) = cos(g(u), g(v)) in [-1, 1]. A zero-norm projected vector
/// yields similarity 0 and bumps the diagnostics counter.
double critic(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
              const ProjectionParams& proj, CriticStats* stats = nullptr);

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long t = 0;
    std::vector<Eigen::MatrixXd> m;
    std::vector<Eigen::MatrixXd> v;
};

/// Classic Adam with the L2 term added to the gradient. Parameters without
/// an accumulated gradient are treated as zero-gradient (weight decay still
/// applies). Deterministic given state.
void adam_step(const std::vector<TensorPtr>& params, AdamState& state, double lr,
               double weight_decay);

}  // namespace gcl
