// SPDX-License-Identifier: Apache-2.0
//
// Frame-feature datasets, the source/target pools used for training and
// evaluation, and episode sampling.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dmsd/rng.hpp"
#include "dmsd/tensor.hpp"

namespace dmsd {

enum class Domain : std::uint8_t { source = 0, target = 1 };

/// One video: an [M x D] matrix of per-frame features.
struct VideoFeature {
    std::uint32_t id = 0;
    Domain domain = Domain::source;
    std::optional<std::uint32_t> label;
    Tensor frames;

    std::size_t num_frames() const { return frames.rows(); }
    std::size_t dim() const { return frames.cols(); }
};

/// A target-domain video with its label physically removed. Training code
/// only ever sees unlabeled target data through this type.
struct UnlabeledVideo {
    std::uint32_t id = 0;
    Tensor frames;
};

struct Dataset {
    std::vector<VideoFeature> videos;
    std::size_t num_categories = 0;
    std::vector<std::string> category_names;

    std::size_t size() const { return videos.size(); }
    bool empty() const { return videos.empty(); }
};

/// Checks per-video shape/finiteness, labels in range and labeled source data.
void validate(const Dataset& ds);

/// Video ids per category (index = label). Unlabeled videos are skipped.
std::vector<std::vector<std::size_t>> videos_by_class(const Dataset& ds);

// --- DMF1 feature files -----------------------------------------------------

/// Reads a DMF1 file. Throws FormatError (bad header, truncation, trailing
/// bytes; messages carry the byte offset) or DataError (invalid content).
Dataset load_features(const std::filesystem::path& path);
Dataset parse_features(std::span<const std::uint8_t> bytes);
void save_features(const Dataset& ds, const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_features(const Dataset& ds);

// --- synthetic data ---------------------------------------------------------

struct SynthSpec {
    std::size_t source_classes = 20;
    std::size_t target_classes = 10;
    std::size_t source_per_class = 20;
    std::size_t target_per_class = 40;
    std::size_t frames = 8;
    std::size_t dim = 32;
    /// Magnitude of the shared positive mean every feature sits on.
    double base_mean = 1.0;
    /// Per-class static offset scale.
    double proto_scale = 1.0;
    /// Per-class temporal drift scale (frame t moves along the drift direction).
    double drift_scale = 1.0;
    /// Per-video constant nuisance offset.
    double instance_scale = 1.0;
    /// Per-frame i.i.d. noise.
    double noise = 1.0;
    /// When set, classes 2j and 2j+1 share a static prototype and have
    /// opposite drift, so only frame order separates them.
    bool paired_classes = true;
    /// Domain shift magnitude; 0 leaves target features untransformed.
    double shift = 1.0;
    double rotation = 1.0;
    double scale_spread = 0.25;
    double offset_scale = 0.5;
    /// Every class must hold at least min_shot + min_query instances.
    std::size_t min_shot = 1;
    std::size_t min_query = 1;
};

class KeyValues;

/// Parses key=value lines into a SynthSpec. Unknown keys are rejected.
SynthSpec parse_synth_spec(const std::string& text);
/// Reads the spec fields present under `prefix` (e.g. "synth.") into `spec`.
void read_synth_spec(KeyValues& kv, SynthSpec& spec, const std::string& prefix);
/// Throws SpecError for non-positive counts, negative scales or classes too
/// small for min_shot + min_query.
void check_synth_spec(const SynthSpec& spec);
std::string format_synth_spec(const SynthSpec& spec);

/// Source and target datasets with disjoint class families; the target family
/// is passed frame-wise through x -> A x + b, A a rotation-plus-scale map
/// and b an offset, both growing with spec.shift (A = I, b = 0 at shift 0).
/// Values are rounded to float32 so they survive the file format unchanged.
std::pair<Dataset, Dataset> gen_synthetic(const SynthSpec& spec, std::uint64_t seed);

// --- target split -----------------------------------------------------------

struct TargetSplit {
    std::vector<UnlabeledVideo> u_train;
    Dataset lt;
    Dataset ut;
};

/// Splits the target set into unlabeled-training, labeled-support and
/// query pools with the given fractions, stratified by class.
TargetSplit split_target(const Dataset& target, std::array<double, 3> fractions, std::uint64_t seed);

// --- episodes ---------------------------------------------------------------

/// One few-shot task. Pointers refer into the datasets it was drawn from,
/// which must outlive the episode.
struct Episode {
    std::size_t way = 0;
    std::size_t shot = 0;
    /// Global category of each episode-local class.
    std::vector<std::uint32_t> classes;
    /// Class-major: support[c * shot + k] is shot k of local class c.
    std::vector<const VideoFeature*> support;
    std::vector<std::size_t> support_labels;
    std::vector<const VideoFeature*> query;
    std::vector<std::size_t> query_labels;
    std::vector<const UnlabeledVideo*> unlabeled;
};

/// Query count per local class when `total` queries are spread over `way`
/// classes: total / way each, the remainder going to randomly chosen classes.
std::vector<std::size_t> distribute_queries(std::size_t total, std::size_t way, Rng& rng);

/// Draws training episodes from a labeled source set plus an unlabeled pool.
class EpisodeSampler {
public:
    EpisodeSampler(const Dataset& source, const std::vector<UnlabeledVideo>& unlabeled, std::size_t way,
                   std::size_t shot, std::size_t queries, std::size_t num_unlabeled);

    Episode sample(Rng& rng) const;
    const std::vector<std::uint32_t>& eligible_classes() const { return eligible_; }

private:
    const Dataset* source_;
    const std::vector<UnlabeledVideo>* unlabeled_;
    std::size_t way_, shot_, queries_, num_unlabeled_;
    std::vector<std::vector<std::size_t>> by_class_;
    std::vector<std::uint32_t> eligible_;
};

/// Draws evaluation episodes: support from `lt`, queries from `ut`.
class EvalEpisodeSampler {
public:
    EvalEpisodeSampler(const Dataset& lt, const Dataset& ut, std::size_t way, std::size_t shot,
                       std::size_t queries);

    Episode sample(Rng& rng) const;
    const std::vector<std::uint32_t>& eligible_classes() const { return eligible_; }

private:
    const Dataset* lt_;
    const Dataset* ut_;
    std::size_t way_, shot_, queries_;
    std::vector<std::vector<std::size_t>> lt_by_class_;
    std::vector<std::vector<std::size_t>> ut_by_class_;
    std::vector<std::uint32_t> eligible_;
};

Episode sample_episode(const Dataset& source, const std::vector<UnlabeledVideo>& u_train, std::size_t way,
                       std::size_t shot, std::size_t queries, std::size_t num_unlabeled, Rng& rng);
Episode sample_eval_episode(const Dataset& lt, const Dataset& ut, std::size_t way, std::size_t shot,
                            std::size_t queries, Rng& rng);

}  // namespace dmsd
