#include "gcl/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace gcl {

void Tensor::accumulate(const Eigen::MatrixXd& g) {
    if (grad.size() == 0)
        grad = g;
    else
        grad += g;
}

void Tensor::zero_grad() {
    if (grad.size() != 0)
        grad.setZero();
    else
        grad = Eigen::MatrixXd::Zero(val.rows(), val.cols());
}

TensorPtr make_param(Eigen::MatrixXd v) {
    auto t = std::make_shared<Tensor>();
    t->val = std::move(v);
    t->requires_grad = true;
    return t;
}

TensorPtr make_const(Eigen::MatrixXd v) {
    auto t = std::make_shared<Tensor>();
    t->val = std::move(v);
    return t;
}

TensorPtr make_scalar(double v, bool requires_grad) {
    auto t = std::make_shared<Tensor>();
    t->val = Eigen::MatrixXd::Constant(1, 1, v);
    t->requires_grad = requires_grad;
    return t;
}

namespace {

TensorPtr make_node(Eigen::MatrixXd v, std::vector<TensorPtr> parents,
                    std::function<void(Tensor&)> back) {
    auto t = std::make_shared<Tensor>();
    t->val = std::move(v);
    bool needs = false;
    for (const auto& p : parents) needs = needs || p->requires_grad;
    t->requires_grad = needs;
    if (needs) {
        t->parents = std::move(parents);
        t->backward_fn = std::move(back);
    }
    return t;
}

void require_same_shape(const TensorPtr& a, const TensorPtr& b, const char* op) {
    if (a->rows() != b->rows() || a->cols() != b->cols())
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

void backward(const TensorPtr& loss) {
    if (!loss->is_scalar()) throw std::invalid_argument("backward: loss must be scalar");
    if (loss->tape_freed) throw std::logic_error("backward: tape already freed");

    // Post-order DFS for a topological order.
    std::vector<Tensor*> order;
    std::unordered_set<Tensor*> visited;
    std::vector<std::pair<Tensor*, std::size_t>> stack{{loss.get(), 0}};
    visited.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Tensor* p = node->parents[idx].get();
            ++idx;
            if (visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Tensor* t : order) t->zero_grad();
    loss->grad(0, 0) = 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Tensor* t = *it;
        if (t->backward_fn) t->backward_fn(*t);
    }

    // Free the tape; leaf gradients stay in place for the optimizer.
    for (Tensor* t : order) {
        t->parents.clear();
        t->backward_fn = nullptr;
    }
    loss->tape_freed = true;
}

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
    if (a->cols() != b->rows()) throw std::invalid_argument("matmul: inner dim mismatch");
    auto [pa, pb] = std::pair{a, b};
    return make_node(a->val * b->val, {a, b}, [pa, pb](Tensor& self) {
        if (pa->requires_grad) pa->accumulate(self.grad * pb->val.transpose());
        if (pb->requires_grad) pb->accumulate(pa->val.transpose() * self.grad);
    });
}

TensorPtr matmul_nt(const TensorPtr& a, const TensorPtr& b) {
    if (a->cols() != b->cols()) throw std::invalid_argument("matmul_nt: inner dim mismatch");
    auto [pa, pb] = std::pair{a, b};
    return make_node(a->val * b->val.transpose(), {a, b}, [pa, pb](Tensor& self) {
        if (pa->requires_grad) pa->accumulate(self.grad * pb->val);
        if (pb->requires_grad) pb->accumulate(self.grad.transpose() * pa->val);
    });
}

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
    require_same_shape(a, b, "add");
    auto [pa, pb] = std::pair{a, b};
    return make_node(a->val + b->val, {a, b}, [pa, pb](Tensor& self) {
        if (pa->requires_grad) pa->accumulate(self.grad);
        if (pb->requires_grad) pb->accumulate(self.grad);
    });
}

TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
    require_same_shape(a, b, "sub");
    auto [pa, pb] = std::pair{a, b};
    return make_node(a->val - b->val, {a, b}, [pa, pb](Tensor& self) {
        if (pa->requires_grad) pa->accumulate(self.grad);
        if (pb->requires_grad) pb->accumulate(-self.grad);
    });
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
    require_same_shape(a, b, "mul");
    auto [pa, pb] = std::pair{a, b};
    return make_node(a->val.cwiseProduct(b->val), {a, b}, [pa, pb](Tensor& self) {
        if (pa->requires_grad) pa->accumulate(self.grad.cwiseProduct(pb->val));
        if (pb->requires_grad) pb->accumulate(self.grad.cwiseProduct(pa->val));
    });
}

TensorPtr div(const TensorPtr& a, const TensorPtr& b) {
    require_same_shape(a, b, "div");
    auto [pa, pb] = std::pair{a, b};
    return make_node(a->val.cwiseQuotient(b->val), {a, b}, [pa, pb](Tensor& self) {
        if (pa->requires_grad) pa->accumulate(self.grad.cwiseQuotient(pb->val));
        if (pb->requires_grad)
            pb->accumulate(-self.grad.cwiseProduct(pa->val)
                                .cwiseQuotient(pb->val.cwiseProduct(pb->val)));
    });
}

TensorPtr scale(const TensorPtr& a, double c) {
    auto pa = a;
    return make_node(c * a->val, {a}, [pa, c](Tensor& self) {
        if (pa->requires_grad) pa->accumulate(c * self.grad);
    });
}

TensorPtr add_row_bias(const TensorPtr& x, const TensorPtr& bias) {
    if (bias->rows() != 1 || bias->cols() != x->cols())
        throw std::invalid_argument("add_row_bias: bias must be 1 x cols");
    auto [px, pb] = std::pair{x, bias};
    Eigen::MatrixXd out = x->val;
    out.rowwise() += bias->val.row(0);
    return make_node(std::move(out), {x, bias}, [px, pb](Tensor& self) {
        if (px->requires_grad) px->accumulate(self.grad);
        if (pb->requires_grad) pb->accumulate(self.grad.colwise().sum());
    });
}

TensorPtr exp_elem(const TensorPtr& a) {
    auto pa = a;
    return make_node(a->val.array().exp().matrix(), {a}, [pa](Tensor& self) {
        if (pa->requires_grad) pa->accumulate(self.grad.cwiseProduct(self.val));
    });
}

TensorPtr log_elem(const TensorPtr& a) {
    auto pa = a;
    return make_node(a->val.array().log().matrix(), {a}, [pa](Tensor& self) {
        if (pa->requires_grad) pa->accumulate(self.grad.cwiseQuotient(pa->val));
    });
}

TensorPtr transpose(const TensorPtr& a) {
    auto pa = a;
    return make_node(a->val.transpose(), {a}, [pa](Tensor& self) {
        if (pa->requires_grad) pa->accumulate(self.grad.transpose());
    });
}

TensorPtr sum_all(const TensorPtr& a) {
    auto pa = a;
    return make_node(Eigen::MatrixXd::Constant(1, 1, a->val.sum()), {a}, [pa](Tensor& self) {
        if (pa->requires_grad)
            pa->accumulate(Eigen::MatrixXd::Constant(pa->rows(), pa->cols(), self.grad(0, 0)));
    });
}

TensorPtr elu(const TensorPtr& x) {
    auto px = x;
    Eigen::MatrixXd out =
        x->val.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
    return make_node(std::move(out), {x}, [px](Tensor& self) {
        if (!px->requires_grad) return;
        Eigen::MatrixXd g = self.grad;
        for (Eigen::Index i = 0; i < g.size(); ++i)
            if (px->val(i) <= 0.0) g(i) *= self.val(i) + 1.0;
        px->accumulate(g);
    });
}

TensorPtr leaky(const TensorPtr& x, double slope) {
    auto px = x;
    Eigen::MatrixXd out =
        x->val.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
    return make_node(std::move(out), {x}, [px, slope](Tensor& self) {
        if (!px->requires_grad) return;
        Eigen::MatrixXd g = self.grad;
        for (Eigen::Index i = 0; i < g.size(); ++i)
            if (px->val(i) <= 0.0) g(i) *= slope;
        px->accumulate(g);
    });
}

TensorPtr prelu(const TensorPtr& x, const TensorPtr& slope) {
    if (!slope->is_scalar()) throw std::invalid_argument("prelu: slope must be scalar");
    auto [px, ps] = std::pair{x, slope};
    const double a = slope->scalar();
    Eigen::MatrixXd out = x->val.unaryExpr([a](double v) { return v > 0.0 ? v : a * v; });
    return make_node(std::move(out), {x, slope}, [px, ps](Tensor& self) {
        const double a = ps->val(0, 0);
        if (px->requires_grad) {
            Eigen::MatrixXd g = self.grad;
            for (Eigen::Index i = 0; i < g.size(); ++i)
                if (px->val(i) <= 0.0) g(i) *= a;
            px->accumulate(g);
        }
        if (ps->requires_grad) {
            double acc = 0.0;
            for (Eigen::Index i = 0; i < self.grad.size(); ++i)
                if (px->val(i) <= 0.0) acc += self.grad(i) * px->val(i);
            ps->accumulate(Eigen::MatrixXd::Constant(1, 1, acc));
        }
    });
}

TensorPtr rows_l2_normalize(const TensorPtr& a, int* zero_rows) {
    auto pa = a;
    const int n = a->rows();
    Eigen::VectorXd norms(n);
    Eigen::MatrixXd out(a->rows(), a->cols());
    int zeros = 0;
    for (int i = 0; i < n; ++i) {
        const double nn = a->val.row(i).norm();
        norms[i] = nn;
        if (nn <= 1e-300) {
            out.row(i).setZero();
            ++zeros;
        } else {
            out.row(i) = a->val.row(i) / nn;
        }
    }
    if (zero_rows) *zero_rows = zeros;
    return make_node(std::move(out), {a}, [pa, norms](Tensor& self) {
        if (!pa->requires_grad) return;
        Eigen::MatrixXd g(self.grad.rows(), self.grad.cols());
        for (int i = 0; i < self.grad.rows(); ++i) {
            if (norms[i] <= 1e-300) {
                g.row(i).setZero();
                continue;
            }
            const double dot = self.grad.row(i).dot(self.val.row(i));
            g.row(i) = (self.grad.row(i) - dot * self.val.row(i)) / norms[i];
        }
        pa->accumulate(g);
    });
}

TensorPtr spmm(const PropagationOperator& op, const TensorPtr& x) {
    auto px = x;
    return make_node(op.apply(x->val), {x}, [px, op](Tensor& self) {
        if (px->requires_grad) px->accumulate(op.apply_transpose(self.grad));
    });
}

TensorPtr concat_cols(const TensorPtr& a, const TensorPtr& b) {
    if (a->rows() != b->rows()) throw std::invalid_argument("concat_cols: row mismatch");
    auto [pa, pb] = std::pair{a, b};
    Eigen::MatrixXd out(a->rows(), a->cols() + b->cols());
    out << a->val, b->val;
    const int ca = a->cols();
    return make_node(std::move(out), {a, b}, [pa, pb, ca](Tensor& self) {
        if (pa->requires_grad) pa->accumulate(self.grad.leftCols(ca));
        if (pb->requires_grad) pb->accumulate(self.grad.rightCols(self.grad.cols() - ca));
    });
}

TensorPtr diag_col(const TensorPtr& a) {
    if (a->rows() != a->cols()) throw std::invalid_argument("diag_col: matrix must be square");
    auto pa = a;
    return make_node(a->val.diagonal(), {a}, [pa](Tensor& self) {
        if (!pa->requires_grad) return;
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(pa->rows(), pa->cols());
        g.diagonal() = self.grad.col(0);
        pa->accumulate(g);
    });
}

TensorPtr offdiag_row_sum(const TensorPtr& e) {
    if (e->rows() != e->cols()) throw std::invalid_argument("offdiag_row_sum: square matrix required");
    auto pe = e;
    Eigen::VectorXd r = e->val.rowwise().sum() - e->val.diagonal();
    return make_node(r, {e}, [pe](Tensor& self) {
        if (!pe->requires_grad) return;
        const int n = pe->rows();
        Eigen::MatrixXd g = self.grad.col(0).replicate(1, n);
        g.diagonal().setZero();
        pe->accumulate(g);
    });
}

TensorPtr offdiag_weighted_row_sum(const TensorPtr& e, const Eigen::MatrixXd& w) {
    if (e->rows() != e->cols()) throw std::invalid_argument("offdiag_weighted_row_sum: square matrix required");
    if (w.rows() != e->rows() || w.cols() != e->cols())
        throw std::invalid_argument("offdiag_weighted_row_sum: weight shape mismatch");
    auto pe = e;
    Eigen::MatrixXd we = w.cwiseProduct(e->val);
    Eigen::VectorXd r = we.rowwise().sum() - we.diagonal();
    return make_node(r, {e}, [pe, w](Tensor& self) {
        if (!pe->requires_grad) return;
        const int n = pe->rows();
        Eigen::MatrixXd g = self.grad.col(0).replicate(1, n).cwiseProduct(w);
        g.diagonal().setZero();
        pe->accumulate(g);
    });
}

TensorPtr row_sum(const TensorPtr& a) {
    auto pa = a;
    return make_node(a->val.rowwise().sum(), {a}, [pa](Tensor& self) {
        if (pa->requires_grad)
            pa->accumulate(self.grad.col(0).replicate(1, pa->cols()));
    });
}

TensorPtr mix_rows(const TensorPtr& v, const std::vector<MixRowSpec>& spec) {
    auto pv = v;
    Eigen::MatrixXd out(static_cast<int>(spec.size()), v->cols());
    for (std::size_t r = 0; r < spec.size(); ++r) {
        const auto& s = spec[r];
        if (s.p < 0 || s.q < 0 || s.p >= v->rows() || s.q >= v->rows())
            throw std::invalid_argument("mix_rows: parent index out of range");
        out.row(static_cast<int>(r)) =
            s.alpha * v->val.row(s.p) + (1.0 - s.alpha) * v->val.row(s.q);
    }
    return make_node(std::move(out), {v}, [pv, spec](Tensor& self) {
        if (!pv->requires_grad) return;
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(pv->rows(), pv->cols());
        for (std::size_t r = 0; r < spec.size(); ++r) {
            const auto& s = spec[r];
            g.row(s.p) += s.alpha * self.grad.row(static_cast<int>(r));
            g.row(s.q) += (1.0 - s.alpha) * self.grad.row(static_cast<int>(r));
        }
        pv->accumulate(g);
    });
}

TensorPtr grouped_row_dot(const TensorPtr& a, const TensorPtr& b, int m) {
    if (m <= 0) throw std::invalid_argument("grouped_row_dot: m must be positive");
    if (a->cols() != b->cols() || a->rows() != b->rows() * m)
        throw std::invalid_argument("grouped_row_dot: shape mismatch");
    auto [pa, pb] = std::pair{a, b};
    const int n = b->rows();
    Eigen::MatrixXd out(n, m);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < m; ++k)
            out(i, k) = a->val.row(i * m + k).dot(b->val.row(i));
    return make_node(std::move(out), {a, b}, [pa, pb, m](Tensor& self) {
        const int n = pb->rows();
        if (pa->requires_grad) {
            Eigen::MatrixXd g = Eigen::MatrixXd::Zero(pa->rows(), pa->cols());
            for (int i = 0; i < n; ++i)
                for (int k = 0; k < m; ++k)
                    g.row(i * m + k) = self.grad(i, k) * pb->val.row(i);
            pa->accumulate(g);
        }
        if (pb->requires_grad) {
            Eigen::MatrixXd g = Eigen::MatrixXd::Zero(pb->rows(), pb->cols());
            for (int i = 0; i < n; ++i)
                for (int k = 0; k < m; ++k)
                    g.row(i) += self.grad(i, k) * pa->val.row(i * m + k);
            pb->accumulate(g);
        }
    });
}

TensorPtr gather_rows(const TensorPtr& x, const std::vector<int>& idx) {
    auto px = x;
    Eigen::MatrixXd out(static_cast<int>(idx.size()), x->cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] < 0 || idx[r] >= x->rows())
            throw std::invalid_argument("gather_rows: index out of range");
        out.row(static_cast<int>(r)) = x->val.row(idx[r]);
    }
    return make_node(std::move(out), {x}, [px, idx](Tensor& self) {
        if (!px->requires_grad) return;
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(px->rows(), px->cols());
        for (std::size_t r = 0; r < idx.size(); ++r)
            g.row(idx[r]) += self.grad.row(static_cast<int>(r));
        px->accumulate(g);
    });
}

}  // namespace gcl
