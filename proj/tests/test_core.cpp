#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "seeds/nn.hpp"
#include "seeds/optim.hpp"
#include "seeds/rng.hpp"
#include "seeds/tensor.hpp"
#include "support.hpp"

using namespace seeds;
using doctest::Approx;

TEST_CASE("matrix products agree with hand results") {
    const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
    const Matrix b = Matrix::from_rows({{5, 6}, {7, 8}});
    CHECK(matmul_nn(a, b) == Matrix::from_rows({{19, 22}, {43, 50}}));
    CHECK(matmul_nt(a, b) == Matrix::from_rows({{17, 23}, {39, 53}}));
    CHECK(matmul_tn(a, b) == Matrix::from_rows({{26, 30}, {38, 44}}));
    CHECK_THROWS_AS(matmul_nn(a, Matrix(3, 2)), ShapeError);
}

TEST_CASE("column slicing and concatenation are inverse") {
    const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
    const Matrix b = Matrix::from_rows({{5}, {6}});
    const Matrix ab = hconcat({&a, &b});
    CHECK(ab.cols() == 3);
    CHECK(column_slice(ab, 0, 2) == a);
    CHECK(column_slice(ab, 2, 1) == b);
    Matrix acc(2, 3);
    add_column_slice(acc, b, 2);
    CHECK(acc(1, 2) == 6);
}

TEST_CASE("linear layer forward examples") {
    LinearLayer zero(3, 2, Activation::identity());
    CHECK(zero.forward(Matrix::from_rows({{1, -2, 3}})) == Matrix(1, 2));

    LinearLayer leaky(2, 2, Activation::leaky());
    leaky.weights = Matrix::from_rows({{1, 0}, {0, 1}});
    const Matrix y = leaky.forward(Matrix::from_rows({{-1, 2}}));
    CHECK(y(0, 0) == Approx(-0.2));
    CHECK(y(0, 1) == Approx(2.0));

    LinearLayer sig(2, 3, Activation::sigmoid());
    const Matrix s = sig.forward(Matrix(1, 2, 4.0));
    for (double v : s.data()) CHECK(v == Approx(0.5));
}

TEST_CASE("scalar linear output: weight gradient equals the input") {
    LinearLayer l(3, 1, Activation::identity());
    const Matrix x = Matrix::from_rows({{0.5, -1.0, 2.0}});
    LinearCache cache;
    l.forward(x, &cache);
    l.backward(cache, Matrix(1, 1, 1.0));
    CHECK(l.grad_weights == x);
    CHECK(l.grad_bias[0] == 1.0);
}

TEST_CASE("constant loss yields zero gradients") {
    RngStream rng(1);
    Mlp net({4, 5, 2}, Activation::leaky(), Activation::identity());
    net.initialize(Init::he, rng);
    ParamList params;
    net.collect(params, "net");
    zero_grads(params);
    MlpCache cache;
    net.forward(testing::randn(rng, 3, 4), &cache);
    const Matrix dx = net.backward(cache, Matrix(3, 2));
    for (const ParamRef& p : params)
        for (double g : *p.grad) CHECK(g == 0.0);
    for (double g : dx.data()) CHECK(g == 0.0);
}

TEST_CASE("two-layer MLP gradient matches central differences") {
    RngStream rng(2);
    Mlp net({4, 6, 3}, Activation::leaky(), Activation::sigmoid());
    net.initialize(Init::he, rng);
    Matrix x = testing::randn(rng, 5, 4);
    const Matrix w = testing::randn(rng, 5, 3);
    ParamList params;
    net.collect(params, "net");
    auto loss = [&] { return testing::project(net.forward(x), w); };
    zero_grads(params);
    MlpCache cache;
    net.forward(x, &cache);
    const Matrix dx = net.backward(cache, w);
    CHECK(check_gradients(params, loss).max_relative_error < 1e-4);
    CHECK(check_input_gradient(x.data(), dx.data(), loss) < 1e-4);
}

TEST_CASE("input gradient of a scalar network and its parameter vjp") {
    RngStream rng(3);
    Mlp net({3, 5, 1}, Activation::leaky(), Activation::identity());
    net.initialize(Init::he, rng);
    const Matrix x = testing::randn(rng, 4, 3);
    const Matrix r = testing::randn(rng, 4, 3);
    MlpCache cache;
    net.forward(x, &cache);
    const Matrix gx = net.input_gradient(cache);
    // Finite differences on the input gradient itself.
    Matrix xp = x;
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t c = 0; c < x.cols(); ++c) {
            const double h = 1e-6;
            xp(i, c) = x(i, c) + h;
            const double up = net.forward(xp)(i, 0);
            xp(i, c) = x(i, c) - h;
            const double dn = net.forward(xp)(i, 0);
            xp(i, c) = x(i, c);
            CHECK(gx(i, c) == Approx((up - dn) / (2 * h)).epsilon(1e-6));
        }
    ParamList params;
    net.collect(params, "net");
    zero_grads(params);
    net.accumulate_input_gradient_vjp(cache, r);
    auto probe = [&] {
        MlpCache c;
        net.forward(x, &c);
        return testing::project(net.input_gradient(c), r);
    };
    CHECK(check_gradients(params, probe).max_relative_error < 1e-4);
}

TEST_CASE("adam: zero gradient without decay leaves parameters unchanged") {
    std::vector<double> value{1.0, -2.0}, grad{0.0, 0.0};
    ParamList params{{"p", &value, &grad}};
    Adam opt({1e-2, 0.0}, params);
    opt.step(params);
    CHECK(value == std::vector<double>{1.0, -2.0});
}

TEST_CASE("adam: first step moves by about lr against the gradient sign") {
    std::vector<double> value{0.0, 0.0}, grad{3.0, -0.01};
    ParamList params{{"p", &value, &grad}};
    Adam opt({1e-3, 0.0}, params);
    opt.step(params);
    CHECK(value[0] == Approx(-1e-3).epsilon(1e-4));
    CHECK(value[1] == Approx(1e-3).epsilon(1e-3));
}

TEST_CASE("adam: identical runs agree and non-finite gradients are rejected") {
    auto run = [] {
        std::vector<double> value{0.5}, grad{0.0};
        ParamList params{{"p", &value, &grad}};
        Adam opt({1e-2, 1e-3}, params);
        for (int i = 0; i < 10; ++i) {
            grad[0] = value[0] - 0.2;
            opt.step(params);
        }
        return value[0];
    };
    CHECK(run() == run());

    std::vector<double> value{1.0}, grad{NAN};
    ParamList params{{"p", &value, &grad}};
    Adam opt({1e-2, 0.0}, params);
    CHECK_THROWS_AS(opt.step(params), NonFiniteGradient);
    CHECK(value[0] == 1.0);
    CHECK(opt.step_count() == 0);
    CHECK_THROWS(opt.set_learning_rate(0.0));
}

TEST_CASE("gaussian sampling moments, determinism and shape") {
    RngStream rng(42);
    const Matrix m = sample_gaussian(rng, 1000, 100);
    CHECK(m.size() == 100000);
    double mu = 0.0, var = 0.0;
    for (double v : m.data()) mu += v;
    mu /= double(m.size());
    for (double v : m.data()) var += (v - mu) * (v - mu);
    var /= double(m.size() - 1);
    CHECK(std::abs(mu) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.02);

    RngStream a(7), b(7);
    CHECK(sample_gaussian(a, 3, 4) == sample_gaussian(b, 3, 4));
    CHECK(a == b);
}

TEST_CASE("rng stream is a pure function of seed and position") {
    RngStream a(9);
    for (int i = 0; i < 5; ++i) a.next_u64();
    RngStream b(9, a.position());
    CHECK(a.next_u64() == b.next_u64());
    CHECK(RngStream(9).fork(1).next_u64() != RngStream(9).fork(2).next_u64());
    RngStream u(3);
    for (int i = 0; i < 1000; ++i) {
        const double x = u.uniform();
        CHECK((x >= 0.0 && x < 1.0));
        CHECK(u.index(7) < 7);
    }
}
