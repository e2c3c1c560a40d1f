// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: key=value text, unknown keys rejected.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "dmsd/dataset.hpp"
#include "dmsd/domain_mixer.hpp"
#include "dmsd/params.hpp"

namespace dmsd {

struct Config {
    // episode shape
    std::size_t way = 5;        ///< N
    std::size_t shot = 1;       ///< K
    std::size_t query = 5;      ///< P, total per episode
    std::size_t unlabeled = 5;  ///< N'

    // features and model
    std::size_t frames = 8;  ///< M
    std::size_t dim = 32;    ///< D
    std::size_t ffn_hidden = 0;  ///< 0 selects 2D
    std::size_t source_categories = 0;  ///< 0 takes the count from the source data

    double gamma = 0.1;
    double tau = 1.0;
    bool open_ends = false;

    std::array<double, 5> alphas{1.0, 1.0, 1.0, 1.0, 1.0};
    double ema_alpha = 0.999;
    /// Apply the EMA after every episode instead of after every optimizer step.
    bool ema_per_episode = false;

    AdamOptions adam;
    std::size_t accum_steps = 16;
    std::size_t pretrain_episodes = 500;
    std::size_t metatrain_episodes = 2000;
    std::size_t eval_episodes = 1000;

    std::uint64_t seed = 1;
    /// Unset seeds are derived from `seed`.
    std::optional<std::uint64_t> data_seed, split_seed, eval_seed;

    std::size_t log_every = 1;
    bool record_wall_time = true;

    // data: DMF1 files, or synthetic data when both paths are empty
    std::string source_file;
    std::string target_file;
    SynthSpec synth;
    std::array<double, 3> split{0.5, 0.25, 0.25};

    // ablation switches
    bool use_mixed_branch = true;
    bool use_cycle_pretrain = true;
    bool use_cycle_meta = true;
    bool distill_supervised = true;
    bool distill_meta = true;
    bool use_icc = true;
    bool icc_literal = false;
    bool use_supervised_loss = true;
    bool use_meta_loss = true;
    /// Also apply the classification losses to the mixed-branch features
    /// (gradient reaches the shared head only).
    bool mixed_branch_ce = false;

    std::size_t hidden() const { return ffn_hidden == 0 ? 2 * dim : ffn_hidden; }
    CenterMode center_mode() const {
        if (!use_icc) return CenterMode::mean;
        return icc_literal ? CenterMode::literal : CenterMode::calibrated;
    }
    std::uint64_t data_seed_value() const;
    std::uint64_t split_seed_value() const;
    std::uint64_t eval_seed_value() const;
};

/// Parses a config. Relative data paths are resolved against base_dir.
Config parse_config(const std::string& text, const std::string& base_dir = "");
Config load_config(const std::string& path);
/// Every key with its current value, in a fixed order; parse_config reads it back.
std::string format_config(const Config& config);
/// Throws ConfigError for out-of-range values.
void check_config(const Config& config);

}  // namespace dmsd
