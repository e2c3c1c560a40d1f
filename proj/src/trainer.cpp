// SPDX-License-Identifier: Apache-2.0
#include "dmsd/trainer.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <iostream>

#include "dmsd/domain_mixer.hpp"
#include "dmsd/errors.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dmsd {

namespace {

/// Runs a row-wise block once over the stacked videos and slices the result back apart.
template <class Fn>
std::vector<Tensor> encode_all(const std::vector<Tensor>& videos, Fn&& block) {
    if (videos.empty()) return {};
    const std::size_t m = videos[0].rows();
    const Tensor out = block(videos.size() == 1 ? videos[0] : concat_rows(videos));
    std::vector<Tensor> parts;
    parts.reserve(videos.size());
    for (std::size_t i = 0; i < videos.size(); ++i) parts.push_back(slice_rows(out, i * m, m));
    return parts;
}

std::size_t global_label(const VideoFeature* v) {
    if (!v->label) throw DataError("labeled video " + std::to_string(v->id) + " has no label");
    return *v->label;
}

double sum_values(const std::vector<Tensor>& terms) {
    double s = 0.0;
    for (const auto& t : terms) s += t.item();
    return s;
}

void summarize(EpisodeLosses& out) {
    auto& r = out.summary;
    r.l_con = sum_values(out.terms.con);
    r.l_meta = sum_values(out.terms.meta);
    r.l_super = sum_values(out.terms.super);
    r.l_m = sum_values(out.terms.distill_m);
    r.l_s = sum_values(out.terms.distill_s);
    r.total = out.total.item();
}

void check_teacher_has_no_grad(const EncoderParams& dme, std::size_t episode) {
    for (const auto& e : dme.store().entries()) {
        if (e.tensor.requires_grad()) {
            throw StructuralError("mixer parameter " + e.name + " requires grad at episode " + std::to_string(episode));
        }
        for (double g : e.tensor.grad()) {
            if (g != 0.0) {
                throw StructuralError("gradient reached mixer parameter " + e.name + " at episode " +
                                      std::to_string(episode));
            }
        }
    }
}

enum class Stage { pretrain, metatrain };

void train_loop(Stage stage, const Config& config, const PreparedData& data, Model& model, std::uint64_t& step,
                MetricsSink* metrics, const TrainHooks& hooks) {
    const bool meta = stage == Stage::metatrain;
    const char* stage_name = meta ? "metatrain" : "pretrain";
    const std::size_t episodes = meta ? config.metatrain_episodes : config.pretrain_episodes;
    // Pre-training only needs unlabeled samples for the cycle loss.
    const std::size_t unlabeled = (!meta && !config.use_cycle_pretrain) ? 0 : config.unlabeled;
    const EpisodeSampler sampler(data.source, data.split.u_train, config.way, config.shot, config.query, unlabeled);
    Rng rng(mix_seed(config.seed, meta ? 2 : 1));

    ParamStore student = model.student();
    ParamStore teacher = model.dme.store();
    const ParamStore student_encoder = model.dte.store();
    Adam adam(student, config.adam);
    student.zero_grad();

    const auto start = std::chrono::steady_clock::now();
    std::size_t pending = 0;
    std::size_t optimizer_steps = 0;
    auto apply_update = [&] {
        adam.step(1.0 / static_cast<double>(pending));
        student.zero_grad();
        pending = 0;
        ++optimizer_steps;
        if (meta && !config.ema_per_episode) ema_update(teacher, student_encoder, config.ema_alpha);
        if (hooks.after_step) hooks.after_step(optimizer_steps, model);
    };

    bool warned = false;
    for (std::size_t e = 0; e < episodes; ++e) {
        const Episode ep = sampler.sample(rng);
        EpisodeLosses losses = meta ? metatrain_losses(model, ep, config) : pretrain_losses(model, ep, config);
        losses.summary.stage = stage_name;
        losses.summary.episode = e;
        if (config.record_wall_time) {
            losses.summary.wall_time =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        }
        if (losses.center_fell_back && !warned) {
            std::cerr << "warning: center weights sum to <= 1e-8 at " << stage_name << " episode " << e
                      << ", using the plain mean\n";
            warned = true;
        }
        if (!std::isfinite(losses.summary.total)) {
            losses.summary.error = "non-finite loss";
            if (metrics) metrics->write(losses.summary);
            throw NumericError(std::string(stage_name) + ": non-finite loss at episode " + std::to_string(e) +
                               " (L_con=" + std::to_string(losses.summary.l_con) +
                               ", L_meta=" + std::to_string(losses.summary.l_meta) +
                               ", L_super=" + std::to_string(losses.summary.l_super) +
                               ", L_m=" + std::to_string(losses.summary.l_m) +
                               ", L_s=" + std::to_string(losses.summary.l_s) + ")");
        }
        if (losses.total.requires_grad()) backward(losses.total);
        if (meta) check_teacher_has_no_grad(model.dme, e);
        if (hooks.after_backward) hooks.after_backward(e, model);
        ++pending;
        ++step;
        if (pending == config.accum_steps) apply_update();
        if (meta && config.ema_per_episode) ema_update(teacher, student_encoder, config.ema_alpha);
        if (metrics && (e % config.log_every == 0 || e + 1 == episodes)) metrics->write(losses.summary);
    }
    if (pending > 0) apply_update();
}

Checkpoint make_checkpoint(const Model& model, const Config& config, std::uint64_t step) {
    Checkpoint ckpt;
    ckpt.params = checkpoint_params(model.all());
    ckpt.config_text = format_config(config);
    ckpt.step = step;
    return ckpt;
}

}  // namespace

Model Model::init(std::size_t dim, std::size_t hidden, std::size_t num_classes, Rng& rng) {
    Model m;
    m.dte = EncoderParams::init(dim, hidden, rng, true);
    m.dtd = EncoderParams::init(dim, hidden, rng, true);
    m.dme = m.dte.clone(false);
    m.head = HeadParams::init(dim, num_classes, rng, true);
    return m;
}

Model Model::from_checkpoint(const Checkpoint& ckpt) {
    Model m;
    m.dte = EncoderParams::from_store(ckpt.params, "dte.").clone(true);
    m.dtd = EncoderParams::from_store(ckpt.params, "dtd.").clone(true);
    m.dme = EncoderParams::from_store(ckpt.params, "dme.").clone(false);
    const HeadParams head = HeadParams::from_store(ckpt.params, "head.");
    m.head = {head.cls_w.detach(), head.cls_b.detach()};
    m.head.cls_w.set_requires_grad(true);
    m.head.cls_b.set_requires_grad(true);
    if (!m.dme.store().congruent_with(m.dte.store())) throw StructuralError("mixer and encoder are not congruent");
    return m;
}

ParamStore Model::student() const {
    ParamStore s;
    s.append(dte.store(), "dte.");
    s.append(dtd.store(), "dtd.");
    s.append(head.store(), "head.");
    return s;
}

ParamStore Model::all() const {
    ParamStore s;
    s.append(dte.store(), "dte.");
    s.append(dtd.store(), "dtd.");
    s.append(dme.store(), "dme.");
    s.append(head.store(), "head.");
    return s;
}

PreparedData prepare_data(const Config& config) {
    PreparedData out;
    Dataset target;
    if (!config.source_file.empty()) {
        out.source = load_features(config.source_file);
        target = load_features(config.target_file);
    } else {
        std::tie(out.source, target) = gen_synthetic(config.synth, config.data_seed_value());
    }
    auto check = [&](const Dataset& ds, Domain domain, const char* what) {
        if (ds.empty()) throw DataError(std::string(what) + " set is empty");
        for (const auto& v : ds.videos) {
            if (v.domain != domain) throw DataError(std::string(what) + " video " + std::to_string(v.id) + " has the wrong domain tag");
            if (v.num_frames() != config.frames || v.dim() != config.dim) {
                throw DataError(std::string(what) + " video " + std::to_string(v.id) + " is " +
                                shape_str(v.frames.shape()) + ", config expects [" + std::to_string(config.frames) +
                                ", " + std::to_string(config.dim) + "]");
            }
        }
    };
    check(out.source, Domain::source, "source");
    check(target, Domain::target, "target");
    out.num_classes = out.source.num_categories;
    if (config.source_categories != 0 && config.source_categories != out.num_classes) {
        throw ConfigError("source_categories=" + std::to_string(config.source_categories) + " but the source data has " +
                          std::to_string(out.num_classes) + " categories");
    }
    out.split = split_target(target, config.split, config.split_seed_value());
    return out;
}

EpisodeLosses pretrain_losses(const Model& model, const Episode& ep, const Config& config) {
    EpisodeLosses out;
    std::vector<Tensor> labeled;
    std::vector<std::size_t> labels;
    for (const auto* group : {&ep.support, &ep.query}) {
        for (const VideoFeature* v : *group) {
            labeled.push_back(v->frames);
            labels.push_back(global_label(v));
        }
    }
    const auto enc = encode_all(labeled, [&](const Tensor& x) { return dte_forward(x, model.dte); });
    for (std::size_t i = 0; i < enc.size(); ++i) {
        out.terms.super.push_back(cross_entropy(supervised_probs(enc[i], model.head), labels[i]));
    }
    if (config.use_cycle_pretrain) {
        std::vector<Tensor> raw;
        for (const auto* u : ep.unlabeled) raw.push_back(u->frames);
        const auto unl_enc = encode_all(raw, [&](const Tensor& x) { return dte_forward(x, model.dte); });
        const auto recon = encode_all(unl_enc, [&](const Tensor& x) { return dtd_forward(x, model.dtd); });
        for (std::size_t i = 0; i < raw.size(); ++i) out.terms.con.push_back(cycle_loss(recon[i], raw[i]));
    }
    out.total = total_loss_pretrain(out.terms.con, out.terms.super, config.alphas[0], config.alphas[1]);
    summarize(out);
    return out;
}

EpisodeLosses metatrain_losses(const Model& model, const Episode& ep, const Config& config,
                               const HeadParams* teacher_head) {
    EpisodeLosses out;
    const std::size_t n_support = ep.support.size();
    const std::size_t n_labeled = n_support + ep.query.size();

    std::vector<Tensor> labeled;
    std::vector<std::size_t> global;
    for (const auto* group : {&ep.support, &ep.query}) {
        for (const VideoFeature* v : *group) {
            labeled.push_back(v->frames);
            global.push_back(global_label(v));
        }
    }
    std::vector<Tensor> unl_raw;
    for (const auto* u : ep.unlabeled) unl_raw.push_back(u->frames);

    // Original-source branch: one encoder pass over support, query and unlabeled.
    std::vector<Tensor> all_raw = labeled;
    if (config.use_cycle_meta) all_raw.insert(all_raw.end(), unl_raw.begin(), unl_raw.end());
    const auto enc = encode_all(all_raw, [&](const Tensor& x) { return dte_forward(x, model.dte); });

    const std::span<const Tensor> enc_span(enc);
    const auto protos = prototypes(enc_span.subspan(0, n_support), ep.way, ep.shot);
    std::vector<ProbDist> p_meta, p_super;
    for (std::size_t q = 0; q < ep.query.size(); ++q) {
        p_meta.push_back(meta_probs(enc[n_support + q], protos, config.gamma, config.tau, config.open_ends));
        if (config.use_meta_loss) out.terms.meta.push_back(cross_entropy(p_meta.back(), ep.query_labels[q]));
    }
    for (std::size_t i = 0; i < n_labeled; ++i) {
        p_super.push_back(supervised_probs(enc[i], model.head));
        if (config.use_supervised_loss) out.terms.super.push_back(cross_entropy(p_super.back(), global[i]));
    }
    if (config.use_cycle_meta) {
        const std::vector<Tensor> unl_enc(enc.begin() + static_cast<std::ptrdiff_t>(n_labeled), enc.end());
        const auto recon = encode_all(unl_enc, [&](const Tensor& x) { return dtd_forward(x, model.dtd); });
        for (std::size_t i = 0; i < unl_raw.size(); ++i) out.terms.con.push_back(cycle_loss(recon[i], unl_raw[i]));
    }

    // Mixed-source branch (teacher). The mixer holds no grad-requiring tensors
    // and the head is detached, so nothing here reaches the student graph.
    if (config.use_mixed_branch) {
        const CalibratedCenter center = icc_center(unl_raw, config.center_mode());
        out.center_fell_back = center.fell_back;
        const auto mixed = encode_all(labeled, [&](const Tensor& x) { return dme_forward(x, center, model.dme); });
        const HeadParams frozen_head = teacher_head ? teacher_head->detached() : model.head.detached();
        const std::span<const Tensor> mixed_span(mixed);
        const auto t_protos = prototypes(mixed_span.subspan(0, n_support), ep.way, ep.shot);
        for (std::size_t q = 0; q < ep.query.size(); ++q) {
            const ProbDist t_meta =
                meta_probs(mixed[n_support + q], t_protos, config.gamma, config.tau, config.open_ends);
            if (config.distill_meta) out.terms.distill_m.push_back(kl_distill(t_meta, p_meta[q]));
        }
        for (std::size_t i = 0; i < n_labeled; ++i) {
            const ProbDist t_super = supervised_probs(mixed[i], frozen_head);
            if (config.distill_supervised) out.terms.distill_s.push_back(kl_distill(t_super, p_super[i]));
            if (config.mixed_branch_ce && config.use_supervised_loss) {
                out.terms.super.push_back(cross_entropy(supervised_probs(mixed[i], model.head), global[i]));
            }
        }
    }

    out.total = total_loss_meta(out.terms, config.alphas);
    summarize(out);
    return out;
}

Checkpoint run_pretrain(const Config& config, const PreparedData& data, MetricsSink* metrics,
                        const TrainHooks& hooks) {
    check_config(config);
    Rng init_rng(mix_seed(config.seed, 0));
    Model model = Model::init(config.dim, config.hidden(), data.num_classes, init_rng);
    std::uint64_t step = 0;
    train_loop(Stage::pretrain, config, data, model, step, metrics, hooks);
    model.dme = model.dte.clone(false);
    return make_checkpoint(model, config, step);
}

Checkpoint run_metatrain(const Config& config, const PreparedData& data, const Checkpoint& init,
                         MetricsSink* metrics, const TrainHooks& hooks) {
    check_config(config);
    check_checkpoint_shapes(init, config.dim, config.hidden(), data.num_classes);
    Model model = Model::from_checkpoint(init);
    std::uint64_t step = init.step;
    train_loop(Stage::metatrain, config, data, model, step, metrics, hooks);
    return make_checkpoint(model, config, step);
}

double eval_episode_accuracy(const EncoderParams& dte, const Episode& ep, const Config& config) {
    std::vector<Tensor> raw;
    for (const auto* group : {&ep.support, &ep.query}) {
        for (const VideoFeature* v : *group) raw.push_back(v->frames);
    }
    const auto enc = encode_all(raw, [&](const Tensor& x) { return dte_forward(x, dte); });
    const std::span<const Tensor> enc_span(enc);
    const auto protos = prototypes(enc_span.subspan(0, ep.support.size()), ep.way, ep.shot);
    std::size_t correct = 0;
    for (std::size_t q = 0; q < ep.query.size(); ++q) {
        const ProbDist p = meta_probs(enc[ep.support.size() + q], protos, config.gamma, config.tau, config.open_ends);
        if (p.argmax() == ep.query_labels[q]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(ep.query.size());
}

EvalReport run_eval(const Config& config, const PreparedData& data, const Checkpoint& ckpt, std::size_t episodes,
                    bool parallel) {
    check_config(config);
    if (episodes == 0) throw UsageError("eval needs at least one episode");
    check_checkpoint_shapes(ckpt, config.dim, config.hidden(), data.num_classes);
    // Read-only copy: nothing below records a graph, so episodes can share it.
    const EncoderParams dte = EncoderParams::from_store(ckpt.params, "dte.").clone(false);
    const EvalEpisodeSampler sampler(data.split.lt, data.split.ut, config.way, config.shot, config.query);
    const std::uint64_t seed = config.eval_seed_value();

    EvalReport report;
    report.episodes = episodes;
    report.per_episode.assign(episodes, 0.0);
    std::exception_ptr failure;
    const auto n = static_cast<std::ptrdiff_t>(episodes);
#pragma omp parallel for schedule(static) if (parallel)
    for (std::ptrdiff_t e = 0; e < n; ++e) {
        try {
            Rng rng(mix_seed(seed, static_cast<std::uint64_t>(e)));
            const Episode ep = sampler.sample(rng);
            report.per_episode[static_cast<std::size_t>(e)] = eval_episode_accuracy(dte, ep, config);
        } catch (...) {
#pragma omp critical(dmsd_eval_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    double sum = 0.0;
    for (double a : report.per_episode) sum += a;
    report.mean_accuracy = sum / static_cast<double>(episodes);
    if (episodes > 1) {
        double ss = 0.0;
        for (double a : report.per_episode) ss += (a - report.mean_accuracy) * (a - report.mean_accuracy);
        const double sd = std::sqrt(ss / static_cast<double>(episodes - 1));
        report.ci95 = 1.96 * sd / std::sqrt(static_cast<double>(episodes));
    }
    return report;
}

}  // namespace dmsd
