// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstring>
#include <limits>

#include "dmsd/errors.hpp"
#include "dmsd/tensor.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace dmsd;
using testutil::random_tensor;

TEST_SUITE("tensor") {

TEST_CASE("elementwise add and mul") {
    const auto a = Tensor::vector({1, 2, 3});
    const auto b = Tensor::vector({4, 5, 6});
    CHECK(mul(a, b).to_vector() == std::vector<double>{4, 10, 18});
    CHECK(add(a, Tensor::zeros({3})).to_vector() == a.to_vector());
    CHECK_THROWS_AS(add(a, Tensor::zeros({2})), ShapeError);
    CHECK_THROWS_AS(mul(a, Tensor::zeros({3, 1})), ShapeError);
}

TEST_CASE("gradient of sum(a*b) with respect to a is b") {
    Rng rng(1);
    Tensor a = random_tensor({3, 4}, rng);
    const Tensor b = random_tensor({3, 4}, rng, false);
    backward(sum(mul(a, b)));
    CHECK(testutil::max_abs_diff(a.grad(), b.data()) == 0.0);
    a.zero_grad();
    CHECK(grad_check([&] { return sum(mul(a, b)); }, a) < 1e-6);
}

TEST_CASE("matmul") {
    const auto m = Tensor::matrix(2, 2, {1, 2, 3, 4});
    const auto eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
    CHECK(matmul(eye, m).to_vector() == m.to_vector());
    const auto r = matmul(m, Tensor::matrix(2, 1, {1, 1}));
    CHECK(r.shape() == Shape{2, 1});
    CHECK(r.to_vector() == std::vector<double>{3, 7});
    CHECK_THROWS_AS(matmul(m, Tensor::zeros({3, 1})), ShapeError);

    Rng rng(2);
    Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
    const Tensor w = random_tensor({3, 2}, rng, false);
    std::vector<Tensor> in{a, b};
    CHECK(grad_check([&] { return sum(mul(matmul(a, b), w)); }, in) < 1e-6);
}

TEST_CASE("linear") {
    Rng rng(3);
    const Tensor x = random_tensor({2, 3}, rng, false);
    const auto eye = Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    CHECK(linear(x, eye, Tensor::zeros({3})).to_vector() == x.to_vector());
    const auto bias = Tensor::vector({0.5, -1.5});
    const auto y = linear(x, Tensor::zeros({3, 2}), bias);
    CHECK(y.to_vector() == std::vector<double>{0.5, -1.5, 0.5, -1.5});
    CHECK_THROWS_AS(linear(x, Tensor::zeros({2, 2}), bias), ShapeError);
    CHECK_THROWS_AS(linear(x, Tensor::zeros({3, 2}), Tensor::zeros({3})), ShapeError);

    Tensor xi = random_tensor({2, 3}, rng), w = random_tensor({3, 4}, rng), b = random_tensor({4}, rng);
    const Tensor probe = random_tensor({2, 4}, rng, false);
    std::vector<Tensor> in{xi, w, b};
    CHECK(grad_check([&] { return sum(mul(linear(xi, w, b), probe)); }, in) < 1e-6);
}

TEST_CASE("softmax, log, reductions") {
    CHECK(softmax(Tensor::vector({0, 0})).to_vector() == std::vector<double>{0.5, 0.5});
    CHECK(l2_norm_sq(Tensor::vector({3, 4})).item() == 25.0);
    CHECK(sum(Tensor::vector({1, 2, 3})).item() == 6.0);
    CHECK(mean(Tensor::vector({1, 2, 3, 6})).item() == 3.0);
    CHECK(relu(Tensor::vector({-1, 0, 2})).to_vector() == std::vector<double>{0, 0, 2});
    CHECK_THROWS_AS(log(Tensor::vector({1, 0})), DomainError);
    CHECK_THROWS_AS(log(Tensor::vector({-2})), DomainError);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(softmax(Tensor::vector({0, nan})), NumericError);
    CHECK_THROWS_AS(relu(Tensor::vector({nan})), NumericError);
    CHECK_THROWS_AS(sum(Tensor::vector({nan})), NumericError);
    CHECK_THROWS_AS(softmax(Tensor::zeros({2, 2})), ShapeError);

    Rng rng(4);
    Tensor logits = random_tensor({5}, rng);
    CHECK(grad_check([&] { return sum(mul(softmax(logits), Tensor::vector({1, -2, 3, 0.5, -1}))); }, logits) < 1e-6);
}

TEST_CASE("softmax sums to one and ignores a constant shift") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(9);
        const Tensor x = random_tensor({n}, rng, false, -30.0, 30.0);
        const auto p = softmax(x).to_vector();
        double total = 0.0;
        for (double v : p) {
            CHECK(v >= 0.0);
            total += v;
        }
        CHECK(std::abs(total - 1.0) < 1e-9);
        const double c = rng.uniform(-50.0, 50.0);
        std::vector<double> shifted = x.to_vector();
        for (double& v : shifted) v += c;
        const auto q = softmax(Tensor::vector(shifted)).to_vector();
        CHECK(testutil::max_abs_diff(p, q) < 1e-9);
    }
}

TEST_CASE("large logits stay finite") {
    const auto p = softmax(Tensor::vector({1000.0, -1000.0, 999.0})).to_vector();
    for (double v : p) CHECK(std::isfinite(v));
    CHECK(p[0] > p[2]);
}

TEST_CASE("cosine similarity") {
    const auto a = Tensor::vector({0.3, -1.2, 2.0});
    CHECK(cosine_similarity(a, a).item() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(cosine_similarity(Tensor::vector({1, 0}), Tensor::vector({0, 1})).item() == 0.0);
    // Hand value: 1 / sqrt(2).
    CHECK(std::abs(cosine_similarity(Tensor::vector({1, 1}), Tensor::vector({1, 0})).item() - 0.7071) < 1e-4);
    CHECK_THROWS_AS(cosine_similarity(Tensor::vector({0, 0}), Tensor::vector({1, 0})), DegenerateInputError);
    Rng rng(6);
    for (int i = 0; i < 100; ++i) {
        const double c = cosine_similarity(random_tensor({7}, rng, false), random_tensor({7}, rng, false)).item();
        CHECK(c >= -1.0);
        CHECK(c <= 1.0);
    }
}

TEST_CASE("backward basics") {
    Tensor x = Tensor::vector({1.5, -2.0, 0.25}, true);
    backward(sum(x));
    CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == std::vector<double>{1, 1, 1});
    x.zero_grad();
    backward(sum(mul(x, x)));
    CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == std::vector<double>{3.0, -4.0, 0.5});
}

TEST_CASE("gradients from several uses are summed") {
    Tensor x = Tensor::vector({2.0, 3.0}, true);
    // x used three times: d/dx (sum(x) + sum(x*x)) = 1 + 2x
    backward(add(sum(x), sum(mul(x, x))));
    CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == std::vector<double>{5.0, 7.0});
}

TEST_CASE("backward errors") {
    Tensor x = Tensor::vector({1, 2}, true);
    CHECK_THROWS_AS(backward(mul(x, x)), UsageError);
    const Tensor loss = sum(mul(x, x));
    backward(loss);
    const std::vector<double> first(x.grad().begin(), x.grad().end());
    CHECK_THROWS_AS(backward(loss), UsageError);
    // No silent double accumulation.
    CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == first);
    CHECK_THROWS_AS(backward(Tensor::scalar(1.0)), UsageError);
    // Re-recording the forward graph is fine.
    backward(sum(mul(x, x)));
    CHECK(x.grad()[0] == 4.0);
}

TEST_CASE("tensors without requires_grad never accumulate") {
    Tensor x = Tensor::vector({1, 2}, true);
    const Tensor c = Tensor::vector({3, 4});
    backward(sum(mul(x, c)));
    CHECK_FALSE(c.has_grad());
    CHECK(c.grad().empty());
    CHECK(x.grad().size() == x.size());
}

TEST_CASE("constant-only expressions record nothing") {
    const Tensor c = add(Tensor::vector({1}), Tensor::vector({2}));
    CHECK(c.is_leaf());
    CHECK_FALSE(c.requires_grad());
}

TEST_CASE("requires_grad only changes on leaves") {
    Tensor x = Tensor::vector({1, 2}, true);
    Tensor y = mul(x, x);
    CHECK_THROWS_AS(y.set_requires_grad(false), UsageError);
    Tensor z = Tensor::vector({1});
    z.set_requires_grad(true);
    CHECK(z.requires_grad());
}

TEST_CASE("shape validation") {
    CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), ShapeError);
    CHECK_THROWS_AS(Tensor::zeros({0}), ShapeError);
    CHECK_THROWS_AS(Tensor::zeros({}), ShapeError);
    CHECK(Tensor::zeros({2, 3}).size() == 6);
}

TEST_CASE("grad_check contract") {
    Rng rng(7);
    Tensor x = random_tensor({4, 3}, rng);
    CHECK(grad_check([&] { return sum(x); }, x) < 1e-10);
    CHECK(grad_check([&] { return sum(softmax(slice_rows(x, 1, 1))); }, x) < 1e-6);
    CHECK_THROWS_AS(grad_check([&] { return sum(x); }, x, 0.0), DomainError);
    CHECK_THROWS_AS(grad_check([&] { return scale(sum(x), std::numeric_limits<double>::infinity()); }, x),
                    NumericError);
    // Inputs come back unchanged and without gradients.
    const auto before = x.to_vector();
    grad_check([&] { return l2_norm_sq(x); }, x);
    CHECK(x.to_vector() == before);
}

TEST_CASE("structural ops") {
    const auto m = Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6});
    CHECK(mean_rows(m).to_vector() == std::vector<double>{3, 4});
    CHECK(mean_rows(m).shape() == Shape{1, 2});
    CHECK(slice_rows(m, 1, 2).to_vector() == std::vector<double>{3, 4, 5, 6});
    CHECK_THROWS_AS(slice_rows(m, 2, 2), ShapeError);
    const Tensor parts[] = {m, slice_rows(m, 0, 1)};
    CHECK(concat_rows(parts).shape() == Shape{4, 2});
    CHECK(tile_rows(slice_rows(m, 0, 1), 3).to_vector() == std::vector<double>{1, 2, 1, 2, 1, 2});
    CHECK(pick(m, 4).item() == 5.0);
    CHECK_THROWS_AS(pick(m, 6), ShapeError);
    const Tensor s[] = {Tensor::scalar(1), Tensor::scalar(-1)};
    CHECK(stack(s).to_vector() == std::vector<double>{1, -1});
    CHECK(clamp_min(Tensor::vector({-1, 0.5}), 0.0).to_vector() == std::vector<double>{0, 0.5});
}

TEST_CASE("frame cosine distance") {
    const auto a = Tensor::matrix(2, 2, {1, 0, 0, 1});
    const auto d = frame_cosine_distance(a, a).to_vector();
    CHECK(d == std::vector<double>{0, 1, 1, 0});
    CHECK_THROWS_AS(frame_cosine_distance(a, Tensor::zeros({2, 3})), ShapeError);
    CHECK_THROWS_AS(frame_cosine_distance(a, Tensor::matrix(2, 2, {1, 0, 0, 0})), DegenerateInputError);
}

TEST_CASE("kl_divergence holds the first argument constant") {
    Tensor q = Tensor::vector({0.2, 0.8}, true);
    Tensor logits = Tensor::vector({0.1, -0.3}, true);
    backward(kl_divergence(q, softmax(logits)));
    CHECK_FALSE(q.has_grad());
    CHECK(logits.has_grad());
}

TEST_CASE("identical op sequences give bit-identical data") {
    auto run = [] {
        Rng rng(99);
        Tensor a = random_tensor({5, 4}, rng), b = random_tensor({4, 3}, rng);
        Tensor out = softmax(slice_rows(relu(matmul(a, b)), 2, 1));
        backward(l2_norm_sq(out));
        auto v = out.to_vector();
        v.insert(v.end(), a.grad().begin(), a.grad().end());
        return v;
    };
    const auto x = run();
    const auto y = run();
    CHECK(std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0);
}

}  // TEST_SUITE
