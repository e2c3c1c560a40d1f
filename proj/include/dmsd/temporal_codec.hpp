// SPDX-License-Identifier: Apache-2.0
//
// Temporal encoder / decoder over [M x D] frame features and the
// reconstruction (cycle consistency) loss.
//
// Every op in the block acts row-wise, so a stack of videos [n*M x D] can be
// pushed through in one call and sliced afterwards with identical results.
#pragma once

#include "dmsd/params.hpp"
#include "dmsd/rng.hpp"
#include "dmsd/tensor.hpp"

namespace dmsd {

/// Query/key/value projections plus a two-layer feed-forward net. The encoder,
/// decoder and mixer all use this layout so their parameters line up by name.
struct EncoderParams {
    Tensor w_q, b_q;
    Tensor w_k, b_k;
    Tensor w_v, b_v;
    Tensor ffn_w1, ffn_b1;
    Tensor ffn_w2, ffn_b2;

    /// Weights uniform in +-1/sqrt(fan_in), biases zero.
    static EncoderParams init(std::size_t dim, std::size_t hidden, Rng& rng, bool requires_grad = true);
    static EncoderParams zeros(std::size_t dim, std::size_t hidden, bool requires_grad = false);

    std::size_t dim() const { return w_q.rows(); }
    std::size_t hidden() const { return ffn_w1.cols(); }

    ParamStore store() const;
    static EncoderParams from_store(const ParamStore& store, const std::string& prefix = "");
    /// Deep copy of the values.
    EncoderParams clone(bool requires_grad) const;
};

/// One attention-style block:
///   Q = linear(query_src), K = linear(kv_src), V = linear(kv_src)
///   weights = Q * K;  reweighted = V * weights        (element-wise)
///   mid = reweighted + residual;  out = mid + FFN(mid), FFN = linear-relu-linear
Tensor encoder_block(const Tensor& query_src, const Tensor& kv_src, const Tensor& residual, const EncoderParams& p);

/// Self-attention form of the block: encoded frames, same shape as the input.
Tensor dte_forward(const Tensor& frames, const EncoderParams& p);

/// Decoder with the encoder's structure, applied to encoded frames.
Tensor dtd_forward(const Tensor& encoded, const EncoderParams& p);

/// (1/M) sum over frames of (1/D) ||recon_m - original_m||^2.
Tensor cycle_loss(const Tensor& recon, const Tensor& original);

}  // namespace dmsd
