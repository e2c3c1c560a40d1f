// SPDX-License-Identifier: Apache-2.0
#include <cstring>

#include "dmsd/errors.hpp"
#include "dmsd/temporal_codec.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace dmsd;
using testutil::random_tensor;

namespace {

Tensor identity(std::size_t d) {
    std::vector<double> v(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) v[i * d + i] = 1.0;
    return Tensor::matrix(d, d, std::move(v));
}

/// Identity projections, zero biases, zero FFN.
EncoderParams identity_params(std::size_t d) {
    EncoderParams p = EncoderParams::zeros(d, 2 * d);
    p.w_q = identity(d);
    p.w_k = identity(d);
    p.w_v = identity(d);
    return p;
}

std::vector<double> cube_plus(const Tensor& f) {
    auto v = f.to_vector();
    for (double& x : v) x = x * x * x + x;
    return v;
}

}  // namespace

TEST_SUITE("codec") {

TEST_CASE("identity projections and zero FFN give f^3 + f") {
    Rng rng(1);
    const Tensor f = random_tensor({8, 5}, rng, false);
    const auto p = identity_params(5);
    CHECK(testutil::max_abs_diff(dte_forward(f, p).to_vector(), cube_plus(f)) < 1e-15);
    CHECK(testutil::max_abs_diff(dtd_forward(f, p).to_vector(), cube_plus(f)) < 1e-15);
}

TEST_CASE("a zero second FFN layer leaves the closed form intact") {
    Rng rng(2);
    const Tensor f = random_tensor({4, 3}, rng, false);
    auto p = identity_params(3);
    p.ffn_w1 = random_tensor({3, 6}, rng, false);
    p.ffn_b1 = random_tensor({6}, rng, false);
    CHECK(testutil::max_abs_diff(dte_forward(f, p).to_vector(), cube_plus(f)) < 1e-15);
}

TEST_CASE("zero query projection annihilates the attention term") {
    Rng rng(3);
    const Tensor f = random_tensor({6, 4}, rng, false);
    EncoderParams p = EncoderParams::init(4, 8, rng, false);
    p.w_q = Tensor::zeros({4, 4});
    // Oracle: f + FFN(f) computed directly.
    std::vector<double> expect(f.size());
    const auto x = f.data();
    for (std::size_t r = 0; r < 6; ++r) {
        std::vector<double> h(8);
        for (std::size_t j = 0; j < 8; ++j) {
            double s = p.ffn_b1.at(j);
            for (std::size_t k = 0; k < 4; ++k) s += x[r * 4 + k] * p.ffn_w1.at(k * 8 + j);
            h[j] = s > 0 ? s : 0;
        }
        for (std::size_t c = 0; c < 4; ++c) {
            double s = p.ffn_b2.at(c);
            for (std::size_t j = 0; j < 8; ++j) s += h[j] * p.ffn_w2.at(j * 4 + c);
            expect[r * 4 + c] = x[r * 4 + c] + s;
        }
    }
    CHECK(testutil::max_abs_diff(dte_forward(f, p).to_vector(), expect) < 1e-12);
}

TEST_CASE("encoder gradients") {
    Rng rng(4);
    EncoderParams p = EncoderParams::init(4, 8, rng, true);
    Tensor f = random_tensor({3, 4}, rng);
    std::vector<Tensor> in{f};
    for (const auto& e : p.store().entries()) in.push_back(e.tensor);
    CHECK(grad_check([&] { return sum(dte_forward(f, p)); }, in) < 1e-4);
    EncoderParams d = EncoderParams::init(4, 8, rng, true);
    for (const auto& e : d.store().entries()) in.push_back(e.tensor);
    CHECK(grad_check([&] { return cycle_loss(dtd_forward(dte_forward(f, p), d), f); }, in) < 1e-4);
}

TEST_CASE("shapes are preserved") {
    Rng rng(5);
    for (std::size_t m : {2, 3, 8}) {
        for (std::size_t d : {1, 4, 9}) {
            const auto p = EncoderParams::init(d, 2 * d, rng, false);
            const auto dec = EncoderParams::init(d, 2 * d, rng, false);
            const Tensor f = random_tensor({m, d}, rng, false);
            CHECK(dte_forward(f, p).shape() == f.shape());
            CHECK(dtd_forward(dte_forward(f, p), dec).shape() == f.shape());
        }
    }
    const auto p = EncoderParams::init(4, 8, rng, false);
    CHECK_THROWS_AS(dte_forward(Tensor::zeros({3, 5}), p), ShapeError);
}

TEST_CASE("stacked videos encode exactly like single videos") {
    Rng rng(6);
    const auto p = EncoderParams::init(4, 8, rng, false);
    const Tensor a = random_tensor({3, 4}, rng, false), b = random_tensor({3, 4}, rng, false);
    const Tensor parts[] = {a, b};
    const Tensor both = dte_forward(concat_rows(parts), p);
    const auto ea = dte_forward(a, p).to_vector();
    const auto eb = dte_forward(b, p).to_vector();
    CHECK(slice_rows(both, 0, 3).to_vector() == ea);
    CHECK(slice_rows(both, 3, 3).to_vector() == eb);
}

TEST_CASE("cycle loss") {
    Rng rng(7);
    const Tensor a = random_tensor({4, 3}, rng, false), b = random_tensor({4, 3}, rng, false);
    CHECK(cycle_loss(a, a).item() == 0.0);
    // M=1, D=2, difference (3, 4): 25 / 2.
    CHECK(cycle_loss(Tensor::matrix(1, 2, {3, 4}), Tensor::matrix(1, 2, {0, 0})).item() == 12.5);
    CHECK(cycle_loss(a, b).item() == cycle_loss(b, a).item());
    CHECK(cycle_loss(a, b).item() > 0.0);
    // Averaged over frames: two frames with the same per-frame error give the same loss as one.
    CHECK(cycle_loss(Tensor::matrix(2, 2, {3, 4, 3, 4}), Tensor::zeros({2, 2})).item() == 12.5);
    CHECK_THROWS_AS(cycle_loss(a, Tensor::zeros({4, 2})), ShapeError);
}

TEST_CASE("parameter layout") {
    Rng rng(8);
    const auto p = EncoderParams::init(6, 12, rng, true);
    CHECK(p.dim() == 6);
    CHECK(p.hidden() == 12);
    CHECK(p.store().size() == 10);
    CHECK(p.store().num_values() == 3 * (36 + 6) + 72 + 12 + 72 + 6);
    for (const auto& e : p.store().entries()) {
        for (double v : e.tensor.data()) CHECK(std::abs(v) <= 1.0 / std::sqrt(6.0));
    }
    const auto q = EncoderParams::from_store(p.store());
    CHECK(q.w_q.id() == p.w_q.id());
    const auto c = p.clone(false);
    CHECK(c.w_q.id() != p.w_q.id());
    CHECK(c.w_q.to_vector() == p.w_q.to_vector());
    CHECK_FALSE(c.w_q.requires_grad());
    auto bad = p.store();
    bad.at("ffn_b2") = Tensor::zeros({5});
    CHECK_THROWS_AS(EncoderParams::from_store(bad), StructuralError);
}

TEST_CASE("encoder is deterministic") {
    auto run = [] {
        Rng rng(9);
        const auto p = EncoderParams::init(5, 10, rng, false);
        return dte_forward(random_tensor({8, 5}, rng, false), p).to_vector();
    };
    const auto a = run(), b = run();
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

}  // TEST_SUITE
