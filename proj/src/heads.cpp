// SPDX-License-Identifier: Apache-2.0
#include "dmsd/heads.hpp"

#include <cmath>

#include "dmsd/errors.hpp"

namespace dmsd {

namespace {
constexpr double kProbFloor = 1e-12;
}

std::size_t ProbDist::argmax() const {
    const auto d = probs.data();
    std::size_t best = 0;
    for (std::size_t i = 1; i < d.size(); ++i) {
        if (d[i] > d[best]) best = i;
    }
    return best;
}

void check_prob_dist(const ProbDist& p) {
    double total = 0.0;
    for (double x : p.probs.data()) {
        if (!std::isfinite(x) || x < 0.0) throw NumericError("probability entry out of range");
        total += x;
    }
    if (std::abs(total - 1.0) > 1e-9) throw NumericError("probabilities sum to " + std::to_string(total));
}

HeadParams HeadParams::init(std::size_t dim, std::size_t num_classes, Rng& rng, bool requires_grad) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    std::vector<double> w(dim * num_classes);
    for (double& x : w) x = rng.uniform(-bound, bound);
    return {Tensor::matrix(dim, num_classes, std::move(w), requires_grad),
            Tensor::zeros({num_classes}, requires_grad)};
}

ParamStore HeadParams::store() const {
    ParamStore s;
    s.add("cls_w", cls_w);
    s.add("cls_b", cls_b);
    return s;
}

HeadParams HeadParams::from_store(const ParamStore& s, const std::string& prefix) {
    HeadParams h{s.at(prefix + "cls_w"), s.at(prefix + "cls_b")};
    if (h.cls_w.ndim() != 2 || h.cls_b.size() != h.cls_w.cols()) {
        throw StructuralError("head parameters under '" + prefix + "' have inconsistent shapes");
    }
    return h;
}

HeadParams HeadParams::detached() const { return {cls_w.detach(), cls_b.detach()}; }

ProbDist supervised_probs(const Tensor& feature, const HeadParams& head) {
    if (feature.ndim() != 2 || feature.cols() != head.cls_w.rows()) {
        throw ShapeError("supervised_probs: feature " + shape_str(feature.shape()) + " does not match head " +
                         shape_str(head.cls_w.shape()));
    }
    return {softmax(linear(mean_rows(feature), head.cls_w, head.cls_b))};
}

std::vector<Tensor> prototypes(std::span<const Tensor> support, std::size_t way, std::size_t shot) {
    if (way == 0 || shot == 0 || support.size() != way * shot) {
        throw SamplingError("prototypes: support has " + std::to_string(support.size()) + " entries, expected " +
                            std::to_string(way) + "x" + std::to_string(shot));
    }
    std::vector<Tensor> out;
    out.reserve(way);
    for (std::size_t c = 0; c < way; ++c) {
        const auto shots = support.subspan(c * shot, shot);
        out.push_back(shot == 1 ? shots[0] : scale(add_n(shots), 1.0 / static_cast<double>(shot)));
    }
    return out;
}

Tensor otam_distance(const Tensor& query, const Tensor& proto, double gamma, bool open_ends) {
    if (query.shape() != proto.shape()) {
        throw ShapeError("otam_distance: " + shape_str(query.shape()) + " vs " + shape_str(proto.shape()));
    }
    return alignment_cost(frame_cosine_distance(query, proto), gamma, open_ends);
}

ProbDist meta_probs(const Tensor& query, std::span<const Tensor> protos, double gamma, double tau, bool open_ends) {
    if (!(tau > 0.0)) throw DomainError("meta_probs: tau must be positive");
    if (protos.empty()) throw SamplingError("meta_probs: no prototypes");
    std::vector<Tensor> logits;
    logits.reserve(protos.size());
    for (const auto& proto : protos) logits.push_back(scale(otam_distance(query, proto, gamma, open_ends), -1.0 / tau));
    return {softmax(stack(logits))};
}

Tensor cross_entropy(const ProbDist& p, std::size_t label) {
    if (label >= p.size()) {
        throw SamplingError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                            std::to_string(p.size()) + " classes");
    }
    return scale(log(clamp_min(pick(p.probs, label), kProbFloor)), -1.0);
}

Tensor kl_distill(const ProbDist& teacher, const ProbDist& student) {
    if (teacher.size() != student.size()) {
        throw ShapeError("kl_distill: lengths " + std::to_string(teacher.size()) + " vs " +
                         std::to_string(student.size()));
    }
    return kl_divergence(teacher.probs, student.probs);
}

void ema_update(ParamStore& teacher, const ParamStore& student, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("ema_update: alpha must lie in [0, 1]");
    if (!teacher.congruent_with(student)) throw StructuralError("ema_update: teacher and student are not congruent");
    for (std::size_t k = 0; k < teacher.size(); ++k) {
        auto t = teacher.entries()[k].tensor.mutable_data();
        const auto s = student.entries()[k].tensor.data();
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = alpha * t[i] + (1.0 - alpha) * s[i];
    }
}

Tensor sum_terms(std::span<const Tensor> terms) {
    if (terms.empty()) return Tensor::scalar(0.0);
    if (terms.size() == 1) return terms[0];
    return sum(stack(terms));
}

namespace {

Tensor weighted_total(std::span<const std::pair<double, std::span<const Tensor>>> parts) {
    std::vector<Tensor> weighted;
    for (const auto& [alpha, terms] : parts) {
        if (!(alpha >= 0.0)) throw DomainError("loss weights must be >= 0");
        if (alpha == 0.0 || terms.empty()) continue;
        weighted.push_back(scale(sum_terms(terms), alpha));
    }
    if (weighted.empty()) return Tensor::scalar(0.0);
    if (weighted.size() == 1) return weighted[0];
    return add_n(weighted);
}

}  // namespace

Tensor total_loss_pretrain(std::span<const Tensor> con, std::span<const Tensor> super, double alpha1, double alpha2) {
    const std::pair<double, std::span<const Tensor>> parts[] = {{alpha1, con}, {alpha2, super}};
    return weighted_total(parts);
}

Tensor total_loss_meta(const MetaLossTerms& t, const std::array<double, 5>& a) {
    const std::pair<double, std::span<const Tensor>> parts[] = {
        {a[0], t.con}, {a[1], t.meta}, {a[2], t.super}, {a[3], t.distill_m}, {a[4], t.distill_s}};
    return weighted_total(parts);
}

}  // namespace dmsd
