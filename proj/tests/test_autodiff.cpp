#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "gdfo/autodiff.hpp"
#include "gradcheck.hpp"

using namespace gdfo;

TEST_CASE("matmul forward matches hand arithmetic") {
    Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
    Tensor b = Tensor::from({2, 1}, {1, 1});
    Tensor c = matmul(a, b);
    REQUIRE(c.shape() == Shape{2, 1});
    CHECK(c.at(0) == 3.0);
    CHECK(c.at(1) == 7.0);
}

TEST_CASE("matmul vector forms") {
    Tensor a = Tensor::from({3}, {1, 2, 3});
    Tensor m = Tensor::from({3, 2}, {1, 0, 0, 1, 1, 1});
    Tensor r = matmul(a, m);
    REQUIRE(r.shape() == Shape{2});
    CHECK(r.at(0) == 4.0);
    CHECK(r.at(1) == 5.0);
    Tensor c = matmul(m, Tensor::from({2}, {1, 2}));
    REQUIRE(c.shape() == Shape{3});
    CHECK(c.at(2) == 3.0);
}

TEST_CASE("softmax of equal logits is uniform") {
    Tensor s = softmax(Tensor::from({2}, {0, 0}));
    CHECK(s.at(0) == 0.5);
    CHECK(s.at(1) == 0.5);
}

TEST_CASE("softmax output is a probability vector") {
    RandomEngine rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x(5);
        for (auto& v : x) v = rng.uniform(-10.0, 10.0);
        Tensor s = softmax(Tensor::from({5}, x));
        double sum = 0.0;
        for (std::size_t i = 0; i < 5; ++i) {
            CHECK(s.at(i) >= 0.0);
            sum += s.at(i);
        }
        CHECK(std::fabs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("mean of [2,4,6] is 4") {
    CHECK(mean(Tensor::from({3}, {2, 4, 6})).item() == 4.0);
}

TEST_CASE("shape mismatch errors name the primitive and shapes") {
    Tensor a = Tensor::from({2, 3}, std::vector<double>(6, 0.0));
    Tensor b = Tensor::from({4, 2}, std::vector<double>(8, 0.0));
    try {
        matmul(a, b);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("matmul") != std::string::npos);
        CHECK(msg.find("[2,3]") != std::string::npos);
        CHECK(msg.find("[4,2]") != std::string::npos);
    }
    CHECK_THROWS_AS(add(a, b), DimensionError);
    CHECK_THROWS_AS(mul(a, b), DimensionError);
}

TEST_CASE("backward of sum(x*x) gives 2x") {
    Tensor x = Tensor::from({3}, {1, 2, 3}).set_requires_grad(true);
    backward(sum(mul(x, x)));
    const auto& g = x.grad();
    CHECK(g[0] == 2.0);
    CHECK(g[1] == 4.0);
    CHECK(g[2] == 6.0);
}

TEST_CASE("constant loss backward is a no-op") {
    Tensor c = Tensor::scalar(3.0);
    CHECK_NOTHROW(backward(c));
    CHECK_FALSE(c.has_grad());
}

TEST_CASE("non-scalar loss is a contract error") {
    Tensor x = Tensor::from({2}, {1, 2}).set_requires_grad(true);
    CHECK_THROWS_AS(backward(mul(x, x)), ContractError);
}

TEST_CASE("double backward on the same graph is a usage error") {
    Tensor x = Tensor::from({2}, {1, 2}).set_requires_grad(true);
    Tensor loss = sum(mul(x, x));
    backward(loss);
    CHECK_THROWS_AS(backward(loss), UsageError);
}

TEST_CASE("reusing part of a consumed graph is a usage error") {
    Tensor x = Tensor::from({2}, {1, 2}).set_requires_grad(true);
    Tensor y = mul(x, x);
    backward(sum(y));
    CHECK_THROWS_AS(backward(mean(y)), UsageError);
}

TEST_CASE("KL between softmax(a) and detached equal distribution has zero gradient") {
    // loss = KL(softmax(a) || q) with q frozen at softmax(a): gradient at the
    // matching point vanishes; verified against central differences.
    RandomEngine rng(11);
    std::vector<double> a0(4);
    for (auto& v : a0) v = rng.uniform(-2.0, 2.0);
    const auto q = softmax_values(a0);
    std::vector<double> logq(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) logq[i] = std::log(q[i]);

    auto build = [&](const std::vector<Tensor>& in) {
        Tensor p = softmax(in[0]);
        return sum(mul(p, sub(log(p), Tensor::from({logq.size()}, logq))));
    };

    Tensor a = Tensor::from({4}, a0).set_requires_grad(true);
    backward(build({a}));
    for (double g : a.grad()) CHECK(std::fabs(g) < 1e-10);

    // central differences agree
    const double h = 1e-5;
    for (std::size_t j = 0; j < a0.size(); ++j) {
        auto plus = a0, minus = a0;
        plus[j] += h;
        minus[j] -= h;
        const double fd = (build({Tensor::from({4}, plus)}).item() -
                           build({Tensor::from({4}, minus)}).item()) /
                          (2 * h);
        CHECK(std::fabs(fd - a.grad()[j]) < 1e-4);
    }
}

TEST_CASE("sgd_step applies param -= lr * grad and clears grads") {
    std::vector<Tensor> params{Tensor::from({1}, {1.0}).set_requires_grad(true)};
    backward(scale(sum(params[0]), 0.5));  // grad = 0.5
    sgd_step(params, 0.1);
    CHECK(params[0].at(0) == 0.95);
    CHECK_FALSE(params[0].has_grad());
    CHECK_THROWS_AS(sgd_step(params, 0.1), ContractError);
}

TEST_CASE("sgd_step with lr=0 leaves params unchanged") {
    std::vector<Tensor> params{Tensor::from({2}, {1.0, -3.0}).set_requires_grad(true)};
    backward(sum(mul(params[0], params[0])));
    sgd_step(params, 0.0);
    CHECK(params[0].at(0) == 1.0);
    CHECK(params[0].at(1) == -3.0);
}

TEST_CASE("two sgd steps on x^2 from x=1 with lr=0.1 give 0.64") {
    std::vector<Tensor> params{Tensor::from({1}, {1.0}).set_requires_grad(true)};
    for (int i = 0; i < 2; ++i) {
        backward(sum(mul(params[0], params[0])));
        sgd_step(params, 0.1);
    }
    CHECK(params[0].at(0) == Catch::Approx(0.64).margin(1e-15));
}

TEST_CASE("gradients accumulate across backward passes until cleared") {
    Tensor x = Tensor::from({2}, {1, 2}).set_requires_grad(true);
    backward(sum(x));
    backward(sum(x));
    CHECK(x.grad()[0] == 2.0);
    x.clear_grad();
}

TEST_CASE("every primitive passes the finite-difference oracle") {
    using testing::check_gradients;
    RandomEngine rng(1234);
    const double tol = 1e-4;

    auto check = [&](const char* name, const std::vector<Shape>& shapes,
                     const testing::BuildFn& build, double magnitude = 2.0) {
        INFO(name);
        auto r = check_gradients(build, shapes, rng, magnitude);
        CHECK(r.max_rel_err < tol);
    };

    check("add", {{3, 2}, {3, 2}},
          [](const std::vector<Tensor>& in) { return sum(mul(add(in[0], in[1]), in[0])); });
    check("add broadcast", {{3, 2}, {2}},
          [](const std::vector<Tensor>& in) { return sum(mul(add(in[0], in[1]), in[0])); });
    check("sub", {{4}, {4}},
          [](const std::vector<Tensor>& in) { return sum(mul(sub(in[0], in[1]), in[1])); });
    check("mul", {{4}, {4}},
          [](const std::vector<Tensor>& in) { return mean(mul(in[0], in[1])); });
    check("scale", {{5}},
          [](const std::vector<Tensor>& in) { return sum(scale(in[0], -1.7)); });
    check("matmul", {{2, 3}, {3, 2}},
          [](const std::vector<Tensor>& in) { return sum(mul(matmul(in[0], in[1]),
                                                             matmul(in[0], in[1]))); });
    check("matmul vec-mat", {{3}, {3, 2}},
          [](const std::vector<Tensor>& in) { return sum(matmul(in[0], in[1])); });
    check("matmul mat-vec", {{2, 3}, {3}},
          [](const std::vector<Tensor>& in) { return sum(matmul(in[0], in[1])); });
    check("relu", {{6}},
          [](const std::vector<Tensor>& in) { return sum(mul(relu(in[0]), in[0])); }, 3.0);
    check("tanh", {{6}},
          [](const std::vector<Tensor>& in) { return sum(tanh(in[0])); });
    check("softmax", {{5}},
          [](const std::vector<Tensor>& in) {
              Tensor w = Tensor::from({5}, {0.3, -0.2, 1.0, 0.5, -0.7});
              return sum(mul(softmax(in[0]), w));
          });
    check("softmax rows", {{2, 3}},
          [](const std::vector<Tensor>& in) { return mean(mul(softmax(in[0]), in[0])); });
    check("log", {{4}},
          [](const std::vector<Tensor>& in) {
              Tensor shifted = add(mul(in[0], in[0]), Tensor::from({4}, {1, 1, 1, 1}));
              return sum(log(shifted));
          });
    check("mean", {{7}}, [](const std::vector<Tensor>& in) { return mean(mul(in[0], in[0])); });
    check("mean_rows", {{3, 4}},
          [](const std::vector<Tensor>& in) { return sum(mul(mean_rows(in[0]),
                                                             mean_rows(in[0]))); });
    check("concat", {{2, 3}, {1, 3}},
          [](const std::vector<Tensor>& in) {
              Tensor c = concat_rows(in[0], in[1]);
              return sum(mul(c, c));
          });
    check("slice", {{4, 2}},
          [](const std::vector<Tensor>& in) {
              Tensor s = slice_rows(in[0], 1, 3);
              return sum(mul(s, s));
          });
    check("take rows", {{5, 2}},
          [](const std::vector<Tensor>& in) {
              Tensor t = take_rows(in[0], {0, 3, 3, 4});
              return sum(mul(t, t));
          });
    check("take elements", {{6}},
          [](const std::vector<Tensor>& in) {
              Tensor t = take_rows(in[0], {5, 1, 1});
              return sum(mul(t, t));
          });
    check("reshape", {{2, 3}},
          [](const std::vector<Tensor>& in) {
              Tensor r = reshape(in[0], {6});
              return sum(mul(r, r));
          });
    check("transpose", {{2, 3}},
          [](const std::vector<Tensor>& in) {
              Tensor t = transpose(in[0]);
              return sum(mul(t, t));
          });
}

TEST_CASE("forward and gradients are deterministic for identical seeds") {
    auto run = [] {
        RandomEngine rng(99);
        Tensor a = Tensor::randn({4, 4}, rng).set_requires_grad(true);
        Tensor b = Tensor::randn({4, 4}, rng);
        Tensor loss = mean(mul(softmax(matmul(a, b)), matmul(a, b)));
        const double value = loss.item();
        backward(loss);
        return std::make_pair(value, a.grad());
    };
    const auto [v1, g1] = run();
    const auto [v2, g2] = run();
    CHECK(v1 == v2);
    CHECK(g1 == g2);
}
