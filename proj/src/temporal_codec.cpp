// SPDX-License-Identifier: Apache-2.0
#include "dmsd/temporal_codec.hpp"

#include <cmath>

#include "dmsd/errors.hpp"

namespace dmsd {

namespace {

Tensor uniform_matrix(std::size_t rows, std::size_t cols, double bound, Rng& rng, bool requires_grad) {
    std::vector<double> v(rows * cols);
    for (double& x : v) x = rng.uniform(-bound, bound);
    return Tensor::matrix(rows, cols, std::move(v), requires_grad);
}

}  // namespace

EncoderParams EncoderParams::init(std::size_t dim, std::size_t hidden, Rng& rng, bool requires_grad) {
    const double bd = 1.0 / std::sqrt(static_cast<double>(dim));
    const double bh = 1.0 / std::sqrt(static_cast<double>(hidden));
    EncoderParams p;
    p.w_q = uniform_matrix(dim, dim, bd, rng, requires_grad);
    p.w_k = uniform_matrix(dim, dim, bd, rng, requires_grad);
    p.w_v = uniform_matrix(dim, dim, bd, rng, requires_grad);
    p.ffn_w1 = uniform_matrix(dim, hidden, bd, rng, requires_grad);
    p.ffn_w2 = uniform_matrix(hidden, dim, bh, rng, requires_grad);
    p.b_q = Tensor::zeros({dim}, requires_grad);
    p.b_k = Tensor::zeros({dim}, requires_grad);
    p.b_v = Tensor::zeros({dim}, requires_grad);
    p.ffn_b1 = Tensor::zeros({hidden}, requires_grad);
    p.ffn_b2 = Tensor::zeros({dim}, requires_grad);
    return p;
}

EncoderParams EncoderParams::zeros(std::size_t dim, std::size_t hidden, bool requires_grad) {
    EncoderParams p;
    p.w_q = Tensor::zeros({dim, dim}, requires_grad);
    p.w_k = Tensor::zeros({dim, dim}, requires_grad);
    p.w_v = Tensor::zeros({dim, dim}, requires_grad);
    p.ffn_w1 = Tensor::zeros({dim, hidden}, requires_grad);
    p.ffn_w2 = Tensor::zeros({hidden, dim}, requires_grad);
    p.b_q = Tensor::zeros({dim}, requires_grad);
    p.b_k = Tensor::zeros({dim}, requires_grad);
    p.b_v = Tensor::zeros({dim}, requires_grad);
    p.ffn_b1 = Tensor::zeros({hidden}, requires_grad);
    p.ffn_b2 = Tensor::zeros({dim}, requires_grad);
    return p;
}

ParamStore EncoderParams::store() const {
    ParamStore s;
    s.add("w_q", w_q);
    s.add("b_q", b_q);
    s.add("w_k", w_k);
    s.add("b_k", b_k);
    s.add("w_v", w_v);
    s.add("b_v", b_v);
    s.add("ffn_w1", ffn_w1);
    s.add("ffn_b1", ffn_b1);
    s.add("ffn_w2", ffn_w2);
    s.add("ffn_b2", ffn_b2);
    return s;
}

EncoderParams EncoderParams::from_store(const ParamStore& s, const std::string& prefix) {
    EncoderParams p;
    p.w_q = s.at(prefix + "w_q");
    p.b_q = s.at(prefix + "b_q");
    p.w_k = s.at(prefix + "w_k");
    p.b_k = s.at(prefix + "b_k");
    p.w_v = s.at(prefix + "w_v");
    p.b_v = s.at(prefix + "b_v");
    p.ffn_w1 = s.at(prefix + "ffn_w1");
    p.ffn_b1 = s.at(prefix + "ffn_b1");
    p.ffn_w2 = s.at(prefix + "ffn_w2");
    p.ffn_b2 = s.at(prefix + "ffn_b2");
    const std::size_t dim = p.w_q.rows();
    const std::size_t hidden = p.ffn_w1.cols();
    const bool ok = p.w_q.shape() == Shape{dim, dim} && p.w_k.shape() == Shape{dim, dim} &&
                    p.w_v.shape() == Shape{dim, dim} && p.ffn_w1.shape() == Shape{dim, hidden} &&
                    p.ffn_w2.shape() == Shape{hidden, dim} && p.b_q.size() == dim && p.b_k.size() == dim &&
                    p.b_v.size() == dim && p.ffn_b1.size() == hidden && p.ffn_b2.size() == dim;
    if (!ok) throw StructuralError("encoder parameters under '" + prefix + "' have inconsistent shapes");
    return p;
}

EncoderParams EncoderParams::clone(bool requires_grad) const {
    auto copy = [requires_grad](const Tensor& t) { return Tensor::from(t.shape(), t.to_vector(), requires_grad); };
    EncoderParams p;
    p.w_q = copy(w_q);
    p.b_q = copy(b_q);
    p.w_k = copy(w_k);
    p.b_k = copy(b_k);
    p.w_v = copy(w_v);
    p.b_v = copy(b_v);
    p.ffn_w1 = copy(ffn_w1);
    p.ffn_b1 = copy(ffn_b1);
    p.ffn_w2 = copy(ffn_w2);
    p.ffn_b2 = copy(ffn_b2);
    return p;
}

Tensor encoder_block(const Tensor& query_src, const Tensor& kv_src, const Tensor& residual, const EncoderParams& p) {
    if (kv_src.ndim() != 2 || kv_src.cols() != p.dim()) {
        throw ShapeError("encoder: input " + shape_str(kv_src.shape()) + " does not match feature size " +
                         std::to_string(p.dim()));
    }
    const Tensor q = linear(query_src, p.w_q, p.b_q);
    const Tensor k = linear(kv_src, p.w_k, p.b_k);
    const Tensor v = linear(kv_src, p.w_v, p.b_v);
    const Tensor weights = mul(q, k);
    const Tensor reweighted = mul(v, weights);
    const Tensor mid = add(reweighted, residual);
    const Tensor hidden = relu(linear(mid, p.ffn_w1, p.ffn_b1));
    return add(mid, linear(hidden, p.ffn_w2, p.ffn_b2));
}

Tensor dte_forward(const Tensor& frames, const EncoderParams& p) { return encoder_block(frames, frames, frames, p); }

Tensor dtd_forward(const Tensor& encoded, const EncoderParams& p) { return encoder_block(encoded, encoded, encoded, p); }

Tensor cycle_loss(const Tensor& recon, const Tensor& original) {
    if (recon.shape() != original.shape() || recon.ndim() != 2) {
        throw ShapeError("cycle_loss: shapes " + shape_str(recon.shape()) + " vs " + shape_str(original.shape()));
    }
    const double frames = static_cast<double>(recon.rows());
    const double dim = static_cast<double>(recon.cols());
    return scale(l2_norm_sq(sub(recon, original)), 1.0 / (frames * dim));
}

}  // namespace dmsd
