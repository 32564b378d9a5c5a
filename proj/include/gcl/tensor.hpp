#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

#include "gcl/graph.hpp"

namespace gcl {

struct Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

/// Reverse-mode autodiff node over a dense matrix value. Scalars are 1x1.
///
/// A forward pass builds a fresh expression graph hanging off the leaf
/// parameter tensors; backward() walks it once, accumulates gradients into
/// every requires_grad leaf, then frees the graph. Gradients are reset at
/// the start of each backward, never accumulated across calls.
struct Tensor {
    Eigen::MatrixXd val;
    Eigen::MatrixXd grad;  // empty until first accumulation
    bool requires_grad = false;

    std::vector<TensorPtr> parents;
    std::function<void(Tensor&)> backward_fn;
    bool tape_freed = false;

    int rows() const { return static_cast<int>(val.rows()); }
    int cols() const { return static_cast<int>(val.cols()); }
    bool is_scalar() const { return val.size() == 1; }
    double scalar() const { return val(0, 0); }

    void accumulate(const Eigen::MatrixXd& g);
    void zero_grad();
};

TensorPtr make_param(Eigen::MatrixXd v);
TensorPtr make_const(Eigen::MatrixXd v);
TensorPtr make_scalar(double v, bool requires_grad = false);

/// Runs reverse-mode accumulation from a scalar loss. Resets gradients of
/// every reachable tensor first, then frees the tape. Throws on non-scalar
/// loss or an already-freed tape.
void backward(const TensorPtr& loss);

// --- elementwise / linear algebra ---
TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);     // A B
TensorPtr matmul_nt(const TensorPtr& a, const TensorPtr& b);  // A B^T
TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
TensorPtr div(const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(const TensorPtr& a, double c);
TensorPtr add_row_bias(const TensorPtr& x, const TensorPtr& bias);  // bias 1 x cols
TensorPtr exp_elem(const TensorPtr& a);
TensorPtr log_elem(const TensorPtr& a);
TensorPtr transpose(const TensorPtr& a);
TensorPtr sum_all(const TensorPtr& a);  // -> 1x1

// --- activations ---
TensorPtr elu(const TensorPtr& x);
TensorPtr leaky(const TensorPtr& x, double slope);     // RReLU in eval mode
TensorPtr prelu(const TensorPtr& x, const TensorPtr& slope);  // slope 1x1 param

// --- structured ops used by the encoders and losses ---

/// Rows scaled to unit L2 norm. Zero rows stay zero (their gradient is zero);
/// zero_rows, when given, receives the count.
TensorPtr rows_l2_normalize(const TensorPtr& a, int* zero_rows = nullptr);

/// One application of a normalized propagation operator (constant w.r.t. autodiff).
TensorPtr spmm(const PropagationOperator& op, const TensorPtr& x);

TensorPtr concat_cols(const TensorPtr& a, const TensorPtr& b);

/// Main diagonal of a square matrix as an n x 1 column.
TensorPtr diag_col(const TensorPtr& a);

/// r_i = sum_{k != i} E_ik over a square matrix.
TensorPtr offdiag_row_sum(const TensorPtr& e);

/// r_i = sum_{k != i} W_ik * E_ik with constant weights W.
TensorPtr offdiag_weighted_row_sum(const TensorPtr& e, const Eigen::MatrixXd& w);

/// r_i = sum_k A_ik over an n x m matrix.
TensorPtr row_sum(const TensorPtr& a);

/// Convex row combinations with constant coefficients:
/// out.row(r) = alpha_r * v.row(p_r) + (1 - alpha_r) * v.row(q_r).
struct MixRowSpec {
    int p = 0;
    int q = 0;
    double alpha = 0.5;
};
TensorPtr mix_rows(const TensorPtr& v, const std::vector<MixRowSpec>& spec);

/// D[i,k] = dot(a.row(i*m + k), b.row(i)); a is (n*m) x d, b is n x d.
TensorPtr grouped_row_dot(const TensorPtr& a, const TensorPtr& b, int m);

/// out.row(r) = x.row(idx[r]); gradient scatter-adds back into x.
TensorPtr gather_rows(const TensorPtr& x, const std::vector<int>& idx);

}  // namespace gcl
