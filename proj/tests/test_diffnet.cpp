#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "bpp/diffnet.hpp"
#include "bpp/errors.hpp"
#include "bpp/rng.hpp"
#include "test_support.hpp"

using namespace bpp;

namespace {

DiffNet random_net(const std::vector<int>& sizes, Activation act, std::uint64_t seed,
                   bool random_bias = true)
{
    DiffNet net = DiffNet::make_mlp(sizes, act, seed);
    if (random_bias) {
        Rng rng(seed + 99);
        for (auto& layer : net.layers)
            for (Eigen::Index i = 0; i < layer.b.size(); ++i)
                layer.b[i] = 0.1 * normal(rng);
    }
    return net;
}

// Scalar probe L = sum_j c_j . y_j for a fixed cotangent matrix c.
double probe_loss(const DiffNet& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& c)
{
    return (net.forward(x).array() * c.array()).sum();
}

} // namespace

TEST_CASE("zero-weight net returns the output offset")
{
    DiffNet net = DiffNet::make_mlp({3, 4, 2}, Activation::Tanh, 1);
    for (auto& layer : net.layers)
        layer.W.setZero();
    net.out_map.offset = Eigen::Vector2d(1.5, -2.0);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 5);
    Eigen::MatrixXd y = net.forward(x);
    for (int j = 0; j < 5; ++j) {
        CHECK(y(0, j) == 1.5);
        CHECK(y(1, j) == -2.0);
    }
}

TEST_CASE("single identity layer is the identity map")
{
    DiffNet net = DiffNet::make_mlp({4, 4}, Activation::Identity, 1);
    net.layers[0].W = Eigen::Matrix4d::Identity();
    net.layers[0].b.setZero();
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 7);
    CHECK((net.forward(x) - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("batched forward equals concatenated per-column forwards bit-exactly")
{
    DiffNet net = random_net({5, 16, 16, 3}, Activation::Softplus, 2);
    Rng rng(3);
    Eigen::MatrixXd x(5, 9);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 9; ++j)
            x(i, j) = normal(rng);

    Eigen::MatrixXd whole = net.forward(x);
    Eigen::MatrixXd head = net.forward(x.leftCols(4));
    Eigen::MatrixXd tail = net.forward(x.rightCols(5));
    CHECK((whole.leftCols(4) - head).cwiseAbs().maxCoeff() == 0.0);
    CHECK((whole.rightCols(5) - tail).cwiseAbs().maxCoeff() == 0.0);
    for (int j = 0; j < 9; ++j) {
        Eigen::MatrixXd single = net.forward(x.col(j));
        CHECK((whole.col(j) - single.col(0)).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("linear least-squares gradient matches the closed form")
{
    DiffNet net = DiffNet::make_mlp({3, 2}, Activation::Identity, 4);
    Rng rng(5);
    const int n = 6;
    Eigen::MatrixXd x(3, n), t(2, n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < 3; ++i)
            x(i, j) = normal(rng);
        for (int i = 0; i < 2; ++i)
            t(i, j) = normal(rng);
    }

    GradTape tape;
    Eigen::MatrixXd y = net.forward(x, tape);
    Eigen::MatrixXd dY = (y - t) / n; // d/dy of mean 0.5||y - t||^2
    ParamGrads grads;
    net.backward(tape, dY, grads);

    Eigen::MatrixXd want = (net.layers[0].W * x + net.layers[0].b.replicate(1, n) - t) *
                           x.transpose() / n;
    CHECK((grads.dW[0] - want).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("zero cotangent gives zero gradients")
{
    DiffNet net = random_net({4, 8, 2}, Activation::Tanh, 6);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 3);
    GradTape tape;
    net.forward(x, tape);
    ParamGrads grads;
    Eigen::MatrixXd dx = net.backward(tape, Eigen::MatrixXd::Zero(2, 3), grads);
    CHECK(dx.cwiseAbs().maxCoeff() == 0.0);
    for (const auto& g : grads.dW)
        CHECK(g.cwiseAbs().maxCoeff() == 0.0);
    for (const auto& g : grads.db)
        CHECK(g.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("batch gradient equals the ordered sum of per-column gradients")
{
    DiffNet net = random_net({3, 6, 2}, Activation::Softplus, 7);
    Rng rng(8);
    const int n = 5;
    Eigen::MatrixXd x(3, n), c(2, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < 3; ++i)
            x(i, j) = normal(rng);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < 2; ++i)
            c(i, j) = normal(rng);

    GradTape tape;
    net.forward(x, tape);
    ParamGrads whole;
    net.backward(tape, c, whole);

    ParamGrads sum;
    for (int j = 0; j < n; ++j) {
        GradTape t1;
        net.forward(x.col(j), t1);
        ParamGrads g1;
        net.backward(t1, c.col(j), g1);
        if (j == 0) {
            sum = g1;
        } else {
            for (std::size_t l = 0; l < sum.dW.size(); ++l) {
                sum.dW[l] += g1.dW[l];
                sum.db[l] += g1.db[l];
            }
        }
    }
    for (std::size_t l = 0; l < sum.dW.size(); ++l) {
        CHECK((whole.dW[l] - sum.dW[l]).cwiseAbs().maxCoeff() == 0.0);
        CHECK((whole.db[l] - sum.db[l]).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("finite-difference audit of every parameter gradient")
{
    for (Activation act : {Activation::Tanh, Activation::Softplus}) {
        DiffNet net = random_net({3, 8, 6, 2}, act, 9);
        net.in_map.offset = Eigen::Vector3d(0.1, -0.2, 0.05);
        net.in_map.scale = Eigen::Vector3d(1.1, 0.9, 1.3);
        net.out_map.offset = Eigen::Vector2d(0.3, -0.1);
        net.out_map.scale = Eigen::Vector2d(1.2, 0.8);

        Rng rng(10);
        const int n = 4;
        Eigen::MatrixXd x(3, n), c(2, n);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < 3; ++i)
                x(i, j) = normal(rng);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < 2; ++i)
                c(i, j) = normal(rng);

        GradTape tape;
        net.forward(x, tape);
        ParamGrads grads;
        Eigen::MatrixXd dx = net.backward(tape, c, grads);

        const double h = 1e-5;
        double worst = 0.0;
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            for (Eigen::Index i = 0; i < net.layers[l].W.rows(); ++i)
                for (Eigen::Index k = 0; k < net.layers[l].W.cols(); ++k) {
                    DiffNet plus = net, minus = net;
                    plus.layers[l].W(i, k) += h;
                    minus.layers[l].W(i, k) -= h;
                    double fd = (probe_loss(plus, x, c) - probe_loss(minus, x, c)) / (2 * h);
                    worst = std::max(worst,
                                     testsup::relative_error(grads.dW[l](i, k), fd));
                }
            for (Eigen::Index i = 0; i < net.layers[l].b.size(); ++i) {
                DiffNet plus = net, minus = net;
                plus.layers[l].b[i] += h;
                minus.layers[l].b[i] -= h;
                double fd = (probe_loss(plus, x, c) - probe_loss(minus, x, c)) / (2 * h);
                worst = std::max(worst, testsup::relative_error(grads.db[l][i], fd));
            }
        }
        // and the input gradients through the affine input map
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < 3; ++i) {
                Eigen::MatrixXd xp = x, xm = x;
                xp(i, j) += h;
                xm(i, j) -= h;
                double fd = (probe_loss(net, xp, c) - probe_loss(net, xm, c)) / (2 * h);
                worst = std::max(worst, testsup::relative_error(dx(i, j), fd));
            }
        CHECK(worst <= 1e-5);
    }
}

TEST_CASE("adam leaves parameters alone under zero gradients")
{
    DiffNet net = random_net({2, 4, 1}, Activation::Tanh, 11);
    DiffNet before = net;
    AdamState st = AdamState::for_net(net);
    ParamGrads zero;
    for (const auto& l : net.layers) {
        zero.dW.push_back(Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()));
        zero.db.push_back(Eigen::VectorXd::Zero(l.b.size()));
    }
    adam_step(net, zero, st, 1e-3);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        CHECK((net.layers[l].W - before.layers[l].W).cwiseAbs().maxCoeff() == 0.0);
        CHECK((net.layers[l].b - before.layers[l].b).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("first adam step is lr * sign(g) after bias correction")
{
    DiffNet net = DiffNet::make_mlp({1, 1}, Activation::Identity, 12);
    net.layers[0].W(0, 0) = 0.5;
    AdamState st = AdamState::for_net(net);
    ParamGrads g;
    g.dW.push_back(Eigen::MatrixXd::Constant(1, 1, 3.0));
    g.db.push_back(Eigen::VectorXd::Zero(1));
    const double lr = 1e-3;
    adam_step(net, g, st, lr);
    // m-hat = g, v-hat = g^2 => step = lr * g / (|g| + eps) ~ lr * sign(g)
    CHECK(net.layers[0].W(0, 0) == doctest::Approx(0.5 - lr).epsilon(1e-6));
}

TEST_CASE("adam updates are deterministic")
{
    auto run = [] {
        DiffNet net = random_net({3, 8, 1}, Activation::Softplus, 13);
        AdamState st = AdamState::for_net(net);
        Rng rng(14);
        for (int it = 0; it < 5; ++it) {
            Eigen::MatrixXd x(3, 4);
            for (int j = 0; j < 4; ++j)
                for (int i = 0; i < 3; ++i)
                    x(i, j) = normal(rng);
            GradTape tape;
            Eigen::MatrixXd y = net.forward(x, tape);
            ParamGrads grads;
            net.backward(tape, y / 4.0, grads);
            adam_step(net, grads, st, 1e-3);
        }
        return net.layers[0].W;
    };
    Eigen::MatrixXd a = run();
    Eigen::MatrixXd b = run();
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("serialization round trip reproduces forward bit-exactly")
{
    DiffNet net = random_net({3, 16, 16, 2}, Activation::Softplus, 15);
    net.in_map.offset = Eigen::Vector3d(0.3, -1.0, 2.0);
    net.in_map.scale = Eigen::Vector3d(2.0, 0.5, 1.5);
    net.out_map.offset = Eigen::Vector2d(-0.7, 0.9);
    net.out_map.scale = Eigen::Vector2d(3.0, 0.25);
    net.model_tag = "roundtrip";

    auto path = std::filesystem::temp_directory_path() / "bpp_diffnet_roundtrip.json";
    net.save(path);
    DiffNet loaded = DiffNet::load(path);
    CHECK(loaded.model_tag == "roundtrip");

    Rng rng(16);
    Eigen::MatrixXd x(3, 10);
    for (int j = 0; j < 10; ++j)
        for (int i = 0; i < 3; ++i)
            x(i, j) = 100.0 * normal(rng);
    CHECK((net.forward(x) - loaded.forward(x)).cwiseAbs().maxCoeff() == 0.0);
    std::filesystem::remove(path);
}

TEST_CASE("a consumed tape cannot be reused")
{
    DiffNet net = random_net({2, 4, 1}, Activation::Tanh, 17);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(2, 3);
    GradTape tape;
    net.forward(x, tape);
    ParamGrads grads;
    net.backward(tape, Eigen::MatrixXd::Ones(1, 3), grads);
    CHECK_THROWS_AS(net.backward(tape, Eigen::MatrixXd::Ones(1, 3), grads), StaleTapeError);
}

TEST_CASE("dimension mismatches are rejected")
{
    DiffNet net = random_net({3, 4, 2}, Activation::Tanh, 18);
    CHECK_THROWS_AS(net.forward(Eigen::MatrixXd::Zero(5, 2)), std::invalid_argument);
}
