// SPDX-License-Identifier: Apache-2.0
//
// Two-stage training (pre-training, then meta-training with the mixed-source
// teacher) and few-shot evaluation on the target domain.
#pragma once

#include <functional>

#include "dmsd/checkpoint.hpp"
#include "dmsd/config.hpp"
#include "dmsd/dataset.hpp"
#include "dmsd/heads.hpp"
#include "dmsd/metrics.hpp"
#include "dmsd/temporal_codec.hpp"

namespace dmsd {

struct Model {
    EncoderParams dte;  ///< student encoder
    EncoderParams dtd;  ///< decoder
    EncoderParams dme;  ///< mixer (teacher); never requires grad
    HeadParams head;    ///< shared supervised head

    static Model init(std::size_t dim, std::size_t hidden, std::size_t num_classes, Rng& rng);
    /// Student tensors require grad; the mixer does not.
    static Model from_checkpoint(const Checkpoint& ckpt);

    /// Trainable entries: "dte.*", "dtd.*", "head.*".
    ParamStore student() const;
    /// student() plus "dme.*".
    ParamStore all() const;
};

struct PreparedData {
    Dataset source;
    TargetSplit split;
    std::size_t num_classes = 0;
};

/// Loads or synthesizes the data, checks M and D against the config, and
/// splits the target set.
PreparedData prepare_data(const Config& config);

struct EpisodeLosses {
    MetaLossTerms terms;
    Tensor total;
    /// Unweighted sums of each term list and the total.
    MetricsRecord summary;
    /// Set when the calibrated center fell back to the plain mean.
    bool center_fell_back = false;
};

/// Pre-training losses for one episode: supervised terms over support and query,
/// cycle terms over the unlabeled samples.
EpisodeLosses pretrain_losses(const Model& model, const Episode& ep, const Config& config);
/// Meta-training losses for one episode, including the gradient-blocked teacher branch.
/// The teacher reads a detached copy of the head; `teacher_head` replaces that
/// copy (finite-difference checks hold it fixed while probing the student head).
EpisodeLosses metatrain_losses(const Model& model, const Episode& ep, const Config& config,
                               const HeadParams* teacher_head = nullptr);

struct TrainHooks {
    /// Called after every optimizer step (and EMA update) with the 1-based step index.
    std::function<void(std::size_t step, const Model& model)> after_step;
    /// Called after every episode's backward pass, before any update.
    std::function<void(std::size_t episode, const Model& model)> after_backward;
};

/// The mixer is copied from the trained encoder at the end.
Checkpoint run_pretrain(const Config& config, const PreparedData& data, MetricsSink* metrics = nullptr,
                        const TrainHooks& hooks = {});
Checkpoint run_metatrain(const Config& config, const PreparedData& data, const Checkpoint& init,
                         MetricsSink* metrics = nullptr, const TrainHooks& hooks = {});

struct EvalReport {
    std::size_t episodes = 0;
    double mean_accuracy = 0;
    /// Half-width of the normal-approximation 95% interval.
    double ci95 = 0;
    std::vector<double> per_episode;
};

/// Fine-tuning-free evaluation: encoder features, prototypes from the labeled
/// support pool, OTAM-based prediction on the query pool. Episodes run in
/// parallel when `parallel` is set; the result does not depend on it.
EvalReport run_eval(const Config& config, const PreparedData& data, const Checkpoint& ckpt, std::size_t episodes,
                    bool parallel = true);
/// Accuracy of a single evaluation episode.
double eval_episode_accuracy(const EncoderParams& dte, const Episode& ep, const Config& config);

}  // namespace dmsd
