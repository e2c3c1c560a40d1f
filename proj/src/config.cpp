// SPDX-License-Identifier: Apache-2.0
#include "dmsd/config.hpp"

#include <cmath>
#include <filesystem>
#include <sstream>

#include "dmsd/errors.hpp"
#include "dmsd/kv.hpp"

namespace dmsd {

std::uint64_t Config::data_seed_value() const { return data_seed.value_or(mix_seed(seed, 11)); }
std::uint64_t Config::split_seed_value() const { return split_seed.value_or(mix_seed(seed, 12)); }
std::uint64_t Config::eval_seed_value() const { return eval_seed.value_or(mix_seed(seed, 13)); }

namespace {

void read_optional_seed(KeyValues& kv, const std::string& key, std::optional<std::uint64_t>& out) {
    if (!kv.contains(key)) return;
    std::uint64_t v = 0;
    kv.read_u64(key, v);
    out = v;
}

std::string resolve(const std::string& path, const std::string& base_dir) {
    if (path.empty() || base_dir.empty()) return path;
    const std::filesystem::path p(path);
    return p.is_absolute() ? path : (std::filesystem::path(base_dir) / p).string();
}

}  // namespace

void check_config(const Config& c) {
    auto positive = [](std::size_t v, const char* name) {
        if (v == 0) throw ConfigError(std::string(name) + " must be positive");
    };
    positive(c.way, "way");
    positive(c.shot, "shot");
    positive(c.query, "query");
    positive(c.dim, "dim");
    positive(c.accum_steps, "accum_steps");
    positive(c.log_every, "log_every");
    if (c.frames < 2) throw ConfigError("frames must be at least 2");
    if (c.unlabeled < 2) throw ConfigError("unlabeled must be at least 2 (the center needs two instances)");
    for (double a : c.alphas) {
        if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("alpha1..alpha5 must be finite and >= 0");
    }
    if (!(c.ema_alpha >= 0.0 && c.ema_alpha <= 1.0)) throw ConfigError("ema_alpha must lie in [0, 1]");
    if (!(c.gamma >= 0.0) || !std::isfinite(c.gamma)) throw ConfigError("gamma must be finite and >= 0");
    if (!(c.tau > 0.0) || !std::isfinite(c.tau)) throw ConfigError("tau must be finite and > 0");
    if (!(c.adam.lr > 0.0)) throw ConfigError("lr must be > 0");
    if (!(c.adam.beta1 >= 0.0 && c.adam.beta1 < 1.0 && c.adam.beta2 >= 0.0 && c.adam.beta2 < 1.0)) {
        throw ConfigError("adam betas must lie in [0, 1)");
    }
    if (!(c.adam.eps > 0.0)) throw ConfigError("adam_eps must be > 0");
    if (c.source_file.empty() != c.target_file.empty()) {
        throw ConfigError("source_file and target_file must be given together");
    }
}

Config parse_config(const std::string& text, const std::string& base_dir) {
    auto kv = KeyValues::parse(text);
    Config c;
    kv.read("way", c.way);
    kv.read("shot", c.shot);
    kv.read("query", c.query);
    kv.read("unlabeled", c.unlabeled);
    kv.read("frames", c.frames);
    kv.read("dim", c.dim);
    kv.read("ffn_hidden", c.ffn_hidden);
    kv.read("source_categories", c.source_categories);
    kv.read("gamma", c.gamma);
    kv.read("tau", c.tau);
    kv.read("open_ends", c.open_ends);
    for (std::size_t k = 0; k < 5; ++k) kv.read("alpha" + std::to_string(k + 1), c.alphas[k]);
    kv.read("ema_alpha", c.ema_alpha);
    kv.read("ema_per_episode", c.ema_per_episode);
    kv.read("lr", c.adam.lr);
    kv.read("adam_beta1", c.adam.beta1);
    kv.read("adam_beta2", c.adam.beta2);
    kv.read("adam_eps", c.adam.eps);
    kv.read("accum_steps", c.accum_steps);
    kv.read("pretrain_episodes", c.pretrain_episodes);
    kv.read("metatrain_episodes", c.metatrain_episodes);
    kv.read("eval_episodes", c.eval_episodes);
    kv.read_u64("seed", c.seed);
    read_optional_seed(kv, "data_seed", c.data_seed);
    read_optional_seed(kv, "split_seed", c.split_seed);
    read_optional_seed(kv, "eval_seed", c.eval_seed);
    kv.read("log_every", c.log_every);
    kv.read("record_wall_time", c.record_wall_time);
    kv.read("source_file", c.source_file);
    kv.read("target_file", c.target_file);
    kv.read("split_u_train", c.split[0]);
    kv.read("split_lt", c.split[1]);
    kv.read("split_ut", c.split[2]);
    kv.read("use_mixed_branch", c.use_mixed_branch);
    kv.read("use_cycle_pretrain", c.use_cycle_pretrain);
    kv.read("use_cycle_meta", c.use_cycle_meta);
    kv.read("distill_supervised", c.distill_supervised);
    kv.read("distill_meta", c.distill_meta);
    kv.read("use_icc", c.use_icc);
    kv.read("icc_literal", c.icc_literal);
    kv.read("use_supervised_loss", c.use_supervised_loss);
    kv.read("use_meta_loss", c.use_meta_loss);
    kv.read("mixed_branch_ce", c.mixed_branch_ce);
    // The synthetic generator follows the model's frame and feature sizes
    // unless told otherwise.
    c.synth.frames = c.frames;
    c.synth.dim = c.dim;
    read_synth_spec(kv, c.synth, "synth.");
    kv.finish();

    c.source_file = resolve(c.source_file, base_dir);
    c.target_file = resolve(c.target_file, base_dir);
    check_config(c);
    if (c.source_file.empty()) check_synth_spec(c.synth);
    return c;
}

Config load_config(const std::string& path) {
    return parse_config(read_text_file(path), std::filesystem::path(path).parent_path().string());
}

std::string format_config(const Config& c) {
    std::ostringstream os;
    os.precision(17);
    auto b = [](bool v) { return v ? "true" : "false"; };
    os << "way=" << c.way << "\nshot=" << c.shot << "\nquery=" << c.query << "\nunlabeled=" << c.unlabeled
       << "\nframes=" << c.frames << "\ndim=" << c.dim << "\nffn_hidden=" << c.ffn_hidden
       << "\nsource_categories=" << c.source_categories << "\ngamma=" << c.gamma << "\ntau=" << c.tau
       << "\nopen_ends=" << b(c.open_ends) << "\n";
    for (std::size_t k = 0; k < 5; ++k) os << "alpha" << k + 1 << "=" << c.alphas[k] << "\n";
    os << "ema_alpha=" << c.ema_alpha << "\nema_per_episode=" << b(c.ema_per_episode) << "\nlr=" << c.adam.lr
       << "\nadam_beta1=" << c.adam.beta1 << "\nadam_beta2=" << c.adam.beta2 << "\nadam_eps=" << c.adam.eps
       << "\naccum_steps=" << c.accum_steps << "\npretrain_episodes=" << c.pretrain_episodes
       << "\nmetatrain_episodes=" << c.metatrain_episodes << "\neval_episodes=" << c.eval_episodes
       << "\nseed=" << c.seed << "\n";
    if (c.data_seed) os << "data_seed=" << *c.data_seed << "\n";
    if (c.split_seed) os << "split_seed=" << *c.split_seed << "\n";
    if (c.eval_seed) os << "eval_seed=" << *c.eval_seed << "\n";
    os << "log_every=" << c.log_every << "\nrecord_wall_time=" << b(c.record_wall_time) << "\n";
    if (!c.source_file.empty()) os << "source_file=" << c.source_file << "\ntarget_file=" << c.target_file << "\n";
    os << "split_u_train=" << c.split[0] << "\nsplit_lt=" << c.split[1] << "\nsplit_ut=" << c.split[2]
       << "\nuse_mixed_branch=" << b(c.use_mixed_branch) << "\nuse_cycle_pretrain=" << b(c.use_cycle_pretrain)
       << "\nuse_cycle_meta=" << b(c.use_cycle_meta) << "\ndistill_supervised=" << b(c.distill_supervised)
       << "\ndistill_meta=" << b(c.distill_meta) << "\nuse_icc=" << b(c.use_icc)
       << "\nicc_literal=" << b(c.icc_literal) << "\nuse_supervised_loss=" << b(c.use_supervised_loss)
       << "\nuse_meta_loss=" << b(c.use_meta_loss) << "\nmixed_branch_ce=" << b(c.mixed_branch_ce) << "\n";
    std::istringstream synth(format_synth_spec(c.synth));
    for (std::string line; std::getline(synth, line);) os << "synth." << line << "\n";
    return os.str();
}

}  // namespace dmsd
