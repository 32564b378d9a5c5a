#include <doctest.h>

#include <random>

#include "gcl/nn.hpp"
#include "oracles.hpp"

using namespace gcl;

namespace {
Graph p3_graph(std::mt19937_64& eng, int fdim) {
    return build_graph({{0, 1}, {1, 2}}, oracle::random_matrix(eng, 3, fdim));
}
}  // namespace

TEST_CASE("zero weights produce a zero embedding") {
    std::mt19937_64 eng(1);
    Graph g = p3_graph(eng, 4);
    RngStream rng(1, "init");
    for (auto kind : {EncoderKind::Gcn2, EncoderKind::SageGcn3}) {
        for (auto act : {Activation::PRelu, Activation::RReluEval, Activation::Elu}) {
            EncoderParams enc = make_encoder(kind, act, 4, 3, rng);
            for (auto& w : enc.weights) w->val.setZero();
            CHECK(forward_encoder(g, enc)->val.cwiseAbs().maxCoeff() == 0.0);
        }
    }
}

TEST_CASE("single node with identity weights and linear activation is the identity") {
    Eigen::MatrixXd feats(1, 3);
    feats << 1.5, -2.0, 0.25;
    Graph g = build_graph({}, feats);
    RngStream rng(2, "init");
    EncoderParams enc = make_encoder(EncoderKind::Gcn2, Activation::Linear, 3, 3, rng);
    for (auto& w : enc.weights) w->val = Eigen::MatrixXd::Identity(3, 3);
    CHECK((forward_encoder(g, enc)->val - feats).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("gcn2 forward matches a straight-line dense recomputation") {
    std::mt19937_64 eng(7);
    Graph g = p3_graph(eng, 4);
    RngStream rng(7, "init");
    EncoderParams enc = make_encoder(EncoderKind::Gcn2, Activation::PRelu, 4, 5, rng);
    const Eigen::MatrixXd got = forward_encoder(g, enc)->val;

    const Eigen::MatrixXd p = oracle::dense_sym_norm(g);
    auto act = [&](Eigen::MatrixXd m, double slope) {
        for (Eigen::Index i = 0; i < m.size(); ++i)
            if (m(i) <= 0.0) m(i) *= slope;
        return m;
    };
    Eigen::MatrixXd h = act(p * (g.features * enc.weights[0]->val),
                            enc.prelu_slopes[0]->scalar());
    h = act(p * (h * enc.weights[1]->val), enc.prelu_slopes[1]->scalar());
    CHECK((got - h).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("sage3 forward matches a straight-line dense recomputation") {
    std::mt19937_64 eng(8);
    Graph g = p3_graph(eng, 4);
    RngStream rng(8, "init");
    EncoderParams enc = make_encoder(EncoderKind::SageGcn3, Activation::Elu, 4, 5, rng);
    const Eigen::MatrixXd got = forward_encoder(g, enc)->val;

    const Eigen::MatrixXd p = oracle::dense_mean_agg(g);
    auto act = [](Eigen::MatrixXd m) {
        for (Eigen::Index i = 0; i < m.size(); ++i)
            if (m(i) <= 0.0) m(i) = std::expm1(m(i));
        return m;
    };
    Eigen::MatrixXd h = g.features;
    for (int layer = 0; layer < 3; ++layer) {
        Eigen::MatrixXd cat(h.rows(), 2 * h.cols());
        cat << p * h, h;
        h = act(cat * enc.weights[static_cast<std::size_t>(layer)]->val);
    }
    CHECK((got - h).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("forward_encoder is deterministic and validates dims") {
    std::mt19937_64 eng(9);
    Graph g = p3_graph(eng, 4);
    RngStream rng(9, "init");
    EncoderParams enc = make_encoder(EncoderKind::Gcn2, Activation::RReluEval, 4, 3, rng);
    CHECK(forward_encoder(g, enc)->val == forward_encoder(g, enc)->val);
    Graph bad = p3_graph(eng, 5);
    CHECK_THROWS_AS(forward_encoder(bad, enc), std::invalid_argument);
}

TEST_CASE("critic examples") {
    RngStream rng(3, "init");
    ProjectionParams proj = make_projection(2, rng);
    // identity projection: w = I, b = 0 and ELU(x)=x for x>0 fails for negatives,
    // so bypass the hidden nonlinearity by scaling: use exact identity weights and
    // positive vectors for the hand examples below.
    proj.w1->val = Eigen::MatrixXd::Identity(2, 2);
    proj.w2->val = Eigen::MatrixXd::Identity(2, 2);
    proj.b1->val.setZero();
    proj.b2->val.setZero();

    Eigen::VectorXd a(2), b(2), u(2), v(2);
    a << 1, 2;
    b << 1, 2;
    CHECK(critic(a, b, proj) == doctest::Approx(1.0).epsilon(1e-12));
    a << 1, 0;
    b << 0, 1;
    CHECK(critic(a, b, proj) == doctest::Approx(0.0).epsilon(1e-12));
    u << 1, 2;
    v << 2, 1;
    CHECK(critic(u, v, proj) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("critic zero-norm projection counts and returns 0") {
    RngStream rng(4, "init");
    ProjectionParams proj = make_projection(2, rng);
    proj.w1->val.setZero();
    proj.w2->val.setZero();
    proj.b1->val.setZero();
    proj.b2->val.setZero();
    CriticStats stats;
    Eigen::VectorXd a(2);
    a << 1, 2;
    CHECK(critic(a, a, proj, &stats) == 0.0);
    CHECK(stats.zero_norm_count == 1);
}

TEST_CASE("critic output bounded on random inputs") {
    std::mt19937_64 eng(11);
    RngStream rng(11, "init");
    ProjectionParams proj = make_projection(5, rng);
    for (int t = 0; t < 200; ++t) {
        const Eigen::VectorXd a = oracle::random_matrix(eng, 5, 1).col(0);
        const Eigen::VectorXd b = oracle::random_matrix(eng, 5, 1).col(0);
        const double c = critic(a, b, proj);
        CHECK(c >= -1.0 - 1e-12);
        CHECK(c <= 1.0 + 1e-12);
    }
}

TEST_CASE("adam first-step identities") {
    // zero gradient, fresh state -> unchanged
    auto p = make_param(Eigen::MatrixXd::Constant(1, 1, 3.0));
    AdamState st;
    p->zero_grad();
    adam_step({p}, st, 0.1, 0.0);
    CHECK(p->scalar() == doctest::Approx(3.0).epsilon(1e-15));

    // lr = 0 -> unchanged
    auto q = make_param(Eigen::MatrixXd::Constant(1, 1, 2.0));
    AdamState st2;
    q->grad = Eigen::MatrixXd::Constant(1, 1, 1.0);
    adam_step({q}, st2, 0.0, 0.0);
    CHECK(q->scalar() == doctest::Approx(2.0).epsilon(1e-15));

    // one step with g = 1: first-step update is lr / (1 + eps)
    auto r = make_param(Eigen::MatrixXd::Constant(1, 1, 1.0));
    AdamState st3;
    r->grad = Eigen::MatrixXd::Constant(1, 1, 1.0);
    adam_step({r}, st3, 0.01, 0.0);
    CHECK(r->scalar() == doctest::Approx(1.0 - 0.01 / (1.0 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("adam is deterministic given state") {
    auto mk = [] {
        auto p = make_param(Eigen::MatrixXd::Constant(2, 2, 0.5));
        return p;
    };
    auto p1 = mk(), p2 = mk();
    AdamState s1, s2;
    for (int it = 0; it < 5; ++it) {
        p1->grad = Eigen::MatrixXd::Constant(2, 2, 0.1 * (it + 1));
        p2->grad = p1->grad;
        adam_step({p1}, s1, 0.05, 1e-5);
        adam_step({p2}, s2, 0.05, 1e-5);
    }
    CHECK(p1->val == p2->val);
}

TEST_CASE("checkpoint layer dims chain from f_dim to hidden") {
    RngStream rng(21, "init");
    EncoderParams enc = make_encoder(EncoderKind::SageGcn3, Activation::Elu, 7, 4, rng);
    CHECK(enc.input_dim() == 7);
    CHECK(enc.output_dim() == 4);
    CHECK(enc.weights[0]->rows() == 14);
    CHECK(enc.weights[1]->rows() == 8);
    CHECK(enc.weights[2]->rows() == 8);
}
