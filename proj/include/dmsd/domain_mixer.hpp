// SPDX-License-Identifier: Apache-2.0
//
// Mixed-source feature machinery: a similarity-calibrated center of the
// unlabeled target instances, and the cross-attention encoder that re-encodes
// source samples against it.
#pragma once

#include <span>
#include <vector>

#include "dmsd/temporal_codec.hpp"

namespace dmsd {

enum class CenterMode {
    /// alpha_i = mean cosine to the other N'-1 instances; center = sum(alpha_i f_i) / sum(alpha_i).
    calibrated,
    /// Index bounds taken literally: both sums run over the first N'-1 instances, scaled by 1/(N'-1).
    literal,
    /// Plain arithmetic mean; all weights 1.
    mean,
};

struct CalibratedCenter {
    Tensor center;                ///< [M x D]
    std::vector<double> weights;  ///< one per input instance, in input order
    /// Set when sum(weights) <= 1e-8 forced the plain-mean fallback.
    bool fell_back = false;
};

/// Cosine similarities are taken between flattened M*D instances. The result
/// does not depend on input order (bit-for-bit): work happens in a canonical
/// order and weights are reported back in input order.
/// Throws DegenerateInputError for fewer than two instances or a zero instance.
CalibratedCenter icc_center(std::span<const Tensor> targets, CenterMode mode = CenterMode::calibrated);

/// Cross-attention block: queries from the center, keys/values and the
/// residual from the source frames. `source` may be a stack of n videos
/// ([n*M x D]); the center is repeated to match.
Tensor dme_forward(const Tensor& source, const CalibratedCenter& center, const EncoderParams& p);

}  // namespace dmsd
