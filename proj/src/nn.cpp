#include "gcl/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace gcl {

Activation activation_from_string(const std::string& s) {
    if (s == "prelu") return Activation::PRelu;
    if (s == "rrelu") return Activation::RReluEval;
    if (s == "elu") return Activation::Elu;
    if (s == "linear") return Activation::Linear;
    throw std::invalid_argument("unknown activation: " + s);
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::PRelu: return "prelu";
        case Activation::RReluEval: return "rrelu";
        case Activation::Elu: return "elu";
        case Activation::Linear: return "linear";
    }
    return "?";
}

EncoderKind encoder_from_string(const std::string& s) {
    if (s == "gcn2") return EncoderKind::Gcn2;
    if (s == "sage3") return EncoderKind::SageGcn3;
    throw std::invalid_argument("unknown encoder: " + s);
}

std::string to_string(EncoderKind k) {
    return k == EncoderKind::Gcn2 ? "gcn2" : "sage3";
}

int EncoderParams::input_dim() const {
    const int c = static_cast<int>(weights.front()->rows());
    return kind == EncoderKind::SageGcn3 ? c / 2 : c;
}

int EncoderParams::output_dim() const {
    return static_cast<int>(weights.back()->cols());
}

std::vector<TensorPtr> EncoderParams::parameters() const {
    std::vector<TensorPtr> ps = weights;
    ps.insert(ps.end(), prelu_slopes.begin(), prelu_slopes.end());
    return ps;
}

std::vector<TensorPtr> Model::parameters() const {
    auto ps = encoder.parameters();
    for (auto& p : projection.parameters()) ps.push_back(p);
    return ps;
}

namespace {

Eigen::MatrixXd glorot(int in, int out, RngStream& rng) {
    const double limit = std::sqrt(6.0 / (in + out));
    Eigen::MatrixXd w(in, out);
    for (int i = 0; i < in; ++i)
        for (int j = 0; j < out; ++j) w(i, j) = (2.0 * rng.uniform() - 1.0) * limit;
    return w;
}

}  // namespace

EncoderParams make_encoder(EncoderKind kind, Activation act, int f_dim, int hidden_dim,
                           RngStream& rng) {
    EncoderParams p;
    p.kind = kind;
    p.activation = act;
    if (kind == EncoderKind::Gcn2) {
        p.weights.push_back(make_param(glorot(f_dim, hidden_dim, rng)));
        p.weights.push_back(make_param(glorot(hidden_dim, hidden_dim, rng)));
    } else {
        p.weights.push_back(make_param(glorot(2 * f_dim, hidden_dim, rng)));
        p.weights.push_back(make_param(glorot(2 * hidden_dim, hidden_dim, rng)));
        p.weights.push_back(make_param(glorot(2 * hidden_dim, hidden_dim, rng)));
    }
    if (act == Activation::PRelu)
        for (std::size_t i = 0; i < p.weights.size(); ++i)
            p.prelu_slopes.push_back(make_scalar(0.25, true));
    return p;
}

ProjectionParams make_projection(int dim, RngStream& rng) {
    ProjectionParams p;
    p.w1 = make_param(glorot(dim, dim, rng));
    p.b1 = make_param(Eigen::MatrixXd::Zero(1, dim));
    p.w2 = make_param(glorot(dim, dim, rng));
    p.b2 = make_param(Eigen::MatrixXd::Zero(1, dim));
    return p;
}

Model make_model(EncoderKind kind, Activation act, int f_dim, int hidden_dim, RngStream& rng) {
    Model m;
    m.encoder = make_encoder(kind, act, f_dim, hidden_dim, rng);
    m.projection = make_projection(hidden_dim, rng);
    return m;
}

TensorPtr apply_activation(const TensorPtr& x, Activation act, const TensorPtr& prelu_slope) {
    switch (act) {
        case Activation::PRelu: return prelu(x, prelu_slope);
        case Activation::RReluEval: return leaky(x, kRReluEvalSlope);
        case Activation::Elu: return elu(x);
        case Activation::Linear: return x;
    }
    throw std::logic_error("unreachable");
}

TensorPtr forward_encoder(const Graph& g, const EncoderParams& params) {
    if (g.feature_dim() != params.input_dim())
        throw std::invalid_argument("forward_encoder: feature dim does not match encoder input");
    auto slope = [&](std::size_t layer) -> TensorPtr {
        return params.activation == Activation::PRelu ? params.prelu_slopes[layer] : nullptr;
    };
    TensorPtr h = make_const(g.features);
    if (params.kind == EncoderKind::Gcn2) {
        const auto op = make_operator(g, PropagationKind::SymNormWithSelfLoops);
        for (std::size_t layer = 0; layer < params.weights.size(); ++layer) {
            h = spmm(op, matmul(h, params.weights[layer]));
            h = apply_activation(h, params.activation, slope(layer));
        }
    } else {
        const auto op = make_operator(g, PropagationKind::MeanAgg);
        for (std::size_t layer = 0; layer < params.weights.size(); ++layer) {
            TensorPtr agg = spmm(op, h);
            h = matmul(concat_cols(agg, h), params.weights[layer]);
            h = apply_activation(h, params.activation, slope(layer));
        }
    }
    return h;
}

TensorPtr forward_projection(const TensorPtr& h, const ProjectionParams& proj) {
    TensorPtr z = add_row_bias(matmul(h, proj.w1), proj.b1);
    z = elu(z);
    return add_row_bias(matmul(z, proj.w2), proj.b2);
}

double critic(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
              const ProjectionParams& proj, CriticStats* stats) {
    auto project = [&](const Eigen::VectorXd& x) {
        TensorPtr t = make_const(x.transpose());
        return forward_projection(t, proj)->val.row(0).transpose().eval();
    };
    const Eigen::VectorXd pu = project(u);
    const Eigen::VectorXd pv = project(v);
    const double nu = pu.norm(), nv = pv.norm();
    if (nu <= 1e-300 || nv <= 1e-300) {
        if (stats) ++stats->zero_norm_count;
        return 0.0;
    }
    return pu.dot(pv) / (nu * nv);
}

void adam_step(const std::vector<TensorPtr>& params, AdamState& state, double lr,
               double weight_decay) {
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.m[i] = Eigen::MatrixXd::Zero(params[i]->rows(), params[i]->cols());
            state.v[i] = Eigen::MatrixXd::Zero(params[i]->rows(), params[i]->cols());
        }
    }
    if (state.m.size() != params.size())
        throw std::invalid_argument("adam_step: state does not match parameter list");
    ++state.t;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        Eigen::MatrixXd g = p.grad.size() != 0
                                ? p.grad
                                : Eigen::MatrixXd::Zero(p.rows(), p.cols());
        if (weight_decay != 0.0) g += weight_decay * p.val;
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g.cwiseProduct(g);
        const Eigen::MatrixXd m_hat = state.m[i] / bc1;
        const Eigen::MatrixXd v_hat = state.v[i] / bc2;
        const Eigen::MatrixXd denom =
            v_hat.cwiseSqrt() + Eigen::MatrixXd::Constant(p.rows(), p.cols(), state.eps);
        p.val -= lr * m_hat.cwiseQuotient(denom);
    }
}

}  // namespace gcl
