// SPDX-License-Identifier: Apache-2.0
#include "dmsd/gradcheck_suite.hpp"

#include <cmath>

#include "dmsd/domain_mixer.hpp"
#include "dmsd/heads.hpp"
#include "dmsd/trainer.hpp"

namespace dmsd {

namespace {

constexpr std::size_t kM = 3;
constexpr std::size_t kD = 4;

Tensor rand_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(shape_size(shape));
    for (double& x : v) x = rng.uniform(lo, hi);
    return Tensor::from(std::move(shape), std::move(v), true);
}

/// Values in [-1, -0.1] or [0.1, 1], so kinks at zero stay out of the probe's reach.
Tensor away_from_zero(Shape shape, Rng& rng) {
    std::vector<double> v(shape_size(shape));
    for (double& x : v) x = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 1.0);
    return Tensor::from(std::move(shape), std::move(v), true);
}

Tensor weighted_sum(const Tensor& x, const Tensor& w) { return sum(mul(x, w)); }

/// A fixed random weighting so every output coordinate contributes differently.
Tensor probe_weights(const Shape& shape, Rng& rng) {
    std::vector<double> v(shape_size(shape));
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return Tensor::from(shape, std::move(v));
}

Config tiny_config() {
    Config c;
    c.way = 2;
    c.shot = 1;
    c.query = 2;
    c.unlabeled = 2;
    c.frames = kM;
    c.dim = kD;
    c.synth.frames = kM;
    c.synth.dim = kD;
    c.synth.source_classes = 3;
    c.synth.target_classes = 2;
    c.synth.source_per_class = 4;
    c.synth.target_per_class = 8;
    c.record_wall_time = false;
    return c;
}

}  // namespace

std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<GradCheckResult> out;
    auto check = [&](const std::string& name, double tol, const std::function<Tensor()>& f, std::vector<Tensor> in) {
        out.push_back({name, grad_check(f, in, kGradCheckStep), tol});
    };
    const double prim = kPrimitiveTolerance;
    const double comp = kCompositeTolerance;

    {
        Tensor a = rand_tensor({kM, kD}, rng), b = rand_tensor({kM, kD}, rng);
        const Tensor w = probe_weights({kM, kD}, rng);
        check("add", prim, [&] { return weighted_sum(add(a, b), w); }, {a, b});
        check("sub", prim, [&] { return weighted_sum(sub(a, b), w); }, {a, b});
        check("mul", prim, [&] { return weighted_sum(mul(a, b), w); }, {a, b});
        check("scale", prim, [&] { return weighted_sum(scale(a, -1.7), w); }, {a});
        check("add_n", prim, [&] {
            const Tensor terms[] = {a, b, a};
            return weighted_sum(add_n(terms), w);
        }, {a, b});
        check("sum", prim, [&] { return sum(a); }, {a});
        check("mean", prim, [&] { return mean(a); }, {a});
        check("l2_norm_sq", prim, [&] { return l2_norm_sq(a); }, {a});
        check("cosine_similarity", prim, [&] { return cosine_similarity(a, b); }, {a, b});
        const Tensor wr = probe_weights({1, kD}, rng);
        check("mean_rows", prim, [&] { return weighted_sum(mean_rows(a), wr); }, {a});
        const Tensor w2 = probe_weights({2, kD}, rng);
        check("slice_rows", prim, [&] { return weighted_sum(slice_rows(a, 1, 2), w2); }, {a});
        const Tensor w6 = probe_weights({2 * kM, kD}, rng);
        check("concat_rows", prim, [&] {
            const Tensor parts[] = {a, b};
            return weighted_sum(concat_rows(parts), w6);
        }, {a, b});
        check("tile_rows", prim, [&] { return weighted_sum(tile_rows(a, 2), w6); }, {a});
        const Tensor wc = probe_weights({kM, kM}, rng);
        check("frame_cosine_distance", prim, [&] { return weighted_sum(frame_cosine_distance(a, b), wc); }, {a, b});
        check("pick", prim, [&] { return mul(pick(a, 5), pick(b, 2)); }, {a, b});
        const Tensor w3 = probe_weights({3}, rng);
        check("stack", prim, [&] {
            const Tensor s[] = {pick(a, 0), pick(b, 3), pick(a, 7)};
            return weighted_sum(stack(s), w3);
        }, {a, b});
    }
    {
        Tensor a = rand_tensor({3, 4}, rng), b = rand_tensor({4, 2}, rng);
        const Tensor w = probe_weights({3, 2}, rng);
        check("matmul", prim, [&] { return weighted_sum(matmul(a, b), w); }, {a, b});
        Tensor x = rand_tensor({2, 3}, rng), wt = rand_tensor({3, 4}, rng), bias = rand_tensor({4}, rng);
        const Tensor wl = probe_weights({2, 4}, rng);
        check("linear", prim, [&] { return weighted_sum(linear(x, wt, bias), wl); }, {x, wt, bias});
    }
    {
        Tensor x = away_from_zero({kM, kD}, rng);
        const Tensor w = probe_weights({kM, kD}, rng);
        check("relu", prim, [&] { return weighted_sum(relu(x), w); }, {x});
        check("clamp_min", prim, [&] { return weighted_sum(clamp_min(x, 0.0), w); }, {x});
        Tensor pos = rand_tensor({kM, kD}, rng, 0.5, 1.5);
        check("log", prim, [&] { return weighted_sum(log(pos), w); }, {pos});
        Tensor logits = rand_tensor({5}, rng);
        const Tensor w5 = probe_weights({5}, rng);
        check("softmax", prim, [&] { return weighted_sum(softmax(logits), w5); }, {logits});
        const Tensor q = softmax(rand_tensor({5}, rng).detach());
        check("kl_divergence", prim, [&] { return kl_divergence(q, softmax(logits)); }, {logits});
    }
    {
        Tensor cost = rand_tensor({4, 4}, rng, 0.0, 2.0);
        check("alignment_cost (gamma 0.1)", comp, [&] { return alignment_cost(cost, 0.1); }, {cost});
        check("alignment_cost (gamma 1, open ends)", comp, [&] { return alignment_cost(cost, 1.0, true); }, {cost});
        Tensor q = rand_tensor({kM, kD}, rng), p = rand_tensor({kM, kD}, rng);
        check("otam_distance", comp, [&] { return otam_distance(q, p, 0.1); }, {q, p});
    }

    Rng init(seed + 1);
    const std::size_t hidden = 2 * kD;
    {
        EncoderParams p = EncoderParams::init(kD, hidden, init, true);
        Tensor f = rand_tensor({kM, kD}, rng);
        const Tensor w = probe_weights({kM, kD}, rng);
        auto inputs = [&](std::vector<Tensor> extra) {
            for (const auto& e : p.store().entries()) extra.push_back(e.tensor);
            return extra;
        };
        check("dte_forward", comp, [&] { return weighted_sum(dte_forward(f, p), w); }, inputs({f}));
        EncoderParams dec = EncoderParams::init(kD, hidden, init, true);
        std::vector<Tensor> both = inputs({});
        for (const auto& e : dec.store().entries()) both.push_back(e.tensor);
        check("dte -> dtd -> cycle_loss", comp, [&] { return cycle_loss(dtd_forward(dte_forward(f, p), dec), f); }, both);
        std::vector<Tensor> targets = {rand_tensor({kM, kD}, rng).detach(), rand_tensor({kM, kD}, rng).detach()};
        const CalibratedCenter center = icc_center(targets);
        Tensor src = rand_tensor({2 * kM, kD}, rng);
        const Tensor w2 = probe_weights({2 * kM, kD}, rng);
        check("dme_forward", comp, [&] { return weighted_sum(dme_forward(src, center, p), w2); }, inputs({src}));
        HeadParams head = HeadParams::init(kD, 3, init, true);
        check("supervised_probs + cross_entropy", comp,
              [&] { return cross_entropy(supervised_probs(f, head), 1); }, {f, head.cls_w, head.cls_b});
        Tensor p0 = rand_tensor({kM, kD}, rng), p1 = rand_tensor({kM, kD}, rng);
        check("meta_probs + cross_entropy", comp, [&] {
            const Tensor protos[] = {p0, p1};
            return cross_entropy(meta_probs(f, protos, 0.1, 1.0), 0);
        }, {f, p0, p1});
    }

    // Full losses on a tiny episode, differentiated with respect to every student parameter.
    const Config config = tiny_config();
    const PreparedData data = prepare_data(config);
    Model model = Model::init(kD, hidden, data.num_classes, init);
    // A teacher that differs from the student keeps the distillation terms non-trivial.
    for (auto& e : model.dme.store().entries()) {
        for (double& v : e.tensor.mutable_data()) v += init.uniform(-0.3, 0.3);
    }
    const EpisodeSampler sampler(data.source, data.split.u_train, config.way, config.shot, config.query,
                                 config.unlabeled);
    Rng ep_rng(seed + 2);
    const Episode ep = sampler.sample(ep_rng);
    std::vector<Tensor> params;
    for (const auto& e : model.student().entries()) params.push_back(e.tensor);
    check("pretrain loss (tiny episode)", comp, [&] { return pretrain_losses(model, ep, config).total; }, params);
    const HeadParams teacher_head = model.head.detached();
    check("meta-training loss (tiny episode)", comp,
          [&] { return metatrain_losses(model, ep, config, &teacher_head).total; }, params);
    return out;
}

}  // namespace dmsd
