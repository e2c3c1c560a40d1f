// SPDX-License-Identifier: Apache-2.0
//
// Classifier heads, losses, the EMA teacher update and loss composition.
#pragma once

#include <array>
#include <span>
#include <vector>

#include "dmsd/params.hpp"
#include "dmsd/rng.hpp"
#include "dmsd/tensor.hpp"

namespace dmsd {

/// A probability vector: entries >= 0 summing to 1.
struct ProbDist {
    Tensor probs;

    std::size_t size() const { return probs.size(); }
    double operator[](std::size_t i) const { return probs.at(i); }
    /// Index of the largest entry (first one on ties).
    std::size_t argmax() const;
};

/// Throws NumericError unless every entry is finite, >= 0 and they sum to 1 +- 1e-9.
void check_prob_dist(const ProbDist& p);

/// Linear classifier over source categories, applied to the temporal mean of a video.
struct HeadParams {
    Tensor cls_w;  ///< [D x num_classes]
    Tensor cls_b;  ///< [num_classes]

    static HeadParams init(std::size_t dim, std::size_t num_classes, Rng& rng, bool requires_grad = true);
    std::size_t num_classes() const { return cls_w.cols(); }
    ParamStore store() const;
    static HeadParams from_store(const ParamStore& store, const std::string& prefix = "");
    HeadParams detached() const;
};

/// softmax(linear(mean over frames of feature)).
ProbDist supervised_probs(const Tensor& feature, const HeadParams& head);

/// Per-class frame-wise mean of a class-major support list (support[c*shot + k]).
std::vector<Tensor> prototypes(std::span<const Tensor> support, std::size_t way, std::size_t shot);

/// Ordered temporal alignment distance: frame costs 1 - cos, combined along a
/// monotone path (hard min at gamma = 0, soft-min for gamma > 0).
Tensor otam_distance(const Tensor& query, const Tensor& proto, double gamma, bool open_ends = false);

/// softmax over classes of -otam_distance(query, proto_c) / tau.
ProbDist meta_probs(const Tensor& query, std::span<const Tensor> protos, double gamma, double tau,
                    bool open_ends = false);

/// -log p[label], p floored at 1e-12.
Tensor cross_entropy(const ProbDist& p, std::size_t label);

/// KL(teacher || student). The teacher side is a constant.
Tensor kl_distill(const ProbDist& teacher, const ProbDist& student);

/// teacher <- alpha * teacher + (1 - alpha) * student, element-wise in place.
void ema_update(ParamStore& teacher, const ParamStore& student, double alpha);

/// alpha1 * sum(con) + alpha2 * sum(super). Zero-weight or empty terms are left out of the graph.
Tensor total_loss_pretrain(std::span<const Tensor> con, std::span<const Tensor> super, double alpha1, double alpha2);

struct MetaLossTerms {
    std::vector<Tensor> con;        ///< N' cycle terms
    std::vector<Tensor> meta;       ///< P query terms
    std::vector<Tensor> super;      ///< N*K+P supervised terms
    std::vector<Tensor> distill_m;  ///< P meta-distillation terms
    std::vector<Tensor> distill_s;  ///< N*K+P supervised-distillation terms
};

/// sum_k alphas[k] * sum(term list k), in the order con, meta, super, distill_m, distill_s.
Tensor total_loss_meta(const MetaLossTerms& terms, const std::array<double, 5>& alphas);

/// Sum of a list of scalar tensors; a constant 0 for an empty list.
Tensor sum_terms(std::span<const Tensor> terms);

}  // namespace dmsd
