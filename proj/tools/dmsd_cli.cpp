// SPDX-License-Identifier: Apache-2.0
// Command-line driver: data generation, both training stages, evaluation and
// the gradient check sweep.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "dmsd/checkpoint.hpp"
#include "dmsd/config.hpp"
#include "dmsd/errors.hpp"
#include "dmsd/gradcheck_suite.hpp"
#include "dmsd/kv.hpp"
#include "dmsd/metrics.hpp"
#include "dmsd/trainer.hpp"

namespace {

std::unique_ptr<dmsd::MetricsSink> open_metrics(const std::string& path) {
    return path.empty() ? std::make_unique<dmsd::MetricsSink>() : std::make_unique<dmsd::MetricsSink>(path);
}

int gen_data(const std::string& spec_path, const std::string& out_dir, std::uint64_t seed) {
    const auto spec = dmsd::parse_synth_spec(dmsd::read_text_file(spec_path));
    const auto [source, target] = dmsd::gen_synthetic(spec, seed);
    std::filesystem::create_directories(out_dir);
    const auto dir = std::filesystem::path(out_dir);
    dmsd::save_features(source, dir / "source.dmf1");
    dmsd::save_features(target, dir / "target.dmf1");
    std::printf("wrote %zu source videos (%zu classes) and %zu target videos (%zu classes) to %s\n", source.size(),
                source.num_categories, target.size(), target.num_categories, out_dir.c_str());
    return 0;
}

int pretrain(const std::string& config_path, const std::string& out, const std::string& metrics_path) {
    const auto config = dmsd::load_config(config_path);
    const auto data = dmsd::prepare_data(config);
    auto metrics = open_metrics(metrics_path);
    const auto ckpt = dmsd::run_pretrain(config, data, metrics.get());
    dmsd::save_checkpoint(ckpt, out);
    const auto& recs = metrics->records();
    if (!recs.empty()) {
        std::printf("pretrain: %zu episodes, last L_con %.6f L_super %.6f\n", config.pretrain_episodes,
                    recs.back().l_con, recs.back().l_super);
    }
    std::printf("checkpoint %s (step %llu)\n", out.c_str(), static_cast<unsigned long long>(ckpt.step));
    return 0;
}

int metatrain(const std::string& config_path, const std::string& init, const std::string& out,
              const std::string& metrics_path) {
    const auto config = dmsd::load_config(config_path);
    const auto data = dmsd::prepare_data(config);
    const auto start = dmsd::load_checkpoint(init);
    auto metrics = open_metrics(metrics_path);
    const auto ckpt = dmsd::run_metatrain(config, data, start, metrics.get());
    dmsd::save_checkpoint(ckpt, out);
    std::printf("checkpoint %s (step %llu)\n", out.c_str(), static_cast<unsigned long long>(ckpt.step));
    return 0;
}

int eval(const std::string& config_path, const std::string& ckpt_path, std::size_t episodes,
         const std::string& metrics_path, bool serial) {
    const auto config = dmsd::load_config(config_path);
    const auto data = dmsd::prepare_data(config);
    const auto ckpt = dmsd::load_checkpoint(ckpt_path);
    const auto report = dmsd::run_eval(config, data, ckpt, episodes == 0 ? config.eval_episodes : episodes, !serial);
    auto metrics = open_metrics(metrics_path);
    dmsd::MetricsRecord r;
    r.stage = "eval";
    r.episode = report.episodes;
    r.eval_accuracy = report.mean_accuracy;
    r.eval_ci95 = report.ci95;
    metrics->write(r);
    std::printf("%zu-way %zu-shot accuracy over %zu episodes: %.2f%% +- %.2f%%\n", config.way, config.shot,
                report.episodes, 100.0 * report.mean_accuracy, 100.0 * report.ci95);
    return 0;
}

int gradcheck(const std::string& scale) {
    if (scale != "tiny") throw dmsd::UsageError("gradcheck: only --scale tiny is available");
    const auto start = std::chrono::steady_clock::now();
    const auto results = dmsd::run_gradcheck_suite();
    bool ok = true;
    for (const auto& r : results) {
        std::printf("%-40s max rel err %.3e  (tol %.0e)  %s\n", r.name.c_str(), r.error, r.tolerance,
                    r.pass() ? "ok" : "FAIL");
        ok = ok && r.pass();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%zu checks, %s, %.2f s\n", results.size(), ok ? "all passed" : "FAILURES", secs);
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Few-shot cross-domain action recognition on frame features"};
    app.require_subcommand(1);

    std::string spec, out, config, init, ckpt, metrics, scale = "tiny";
    std::uint64_t seed = 1;
    std::size_t episodes = 0;
    bool serial = false;

    auto* gen = app.add_subcommand("gen-data", "Generate synthetic source/target DMF1 files");
    gen->add_option("--spec", spec, "key=value synthetic spec")->required();
    gen->add_option("--out", out, "output directory")->required();
    gen->add_option("--seed", seed, "generator seed");

    auto* pre = app.add_subcommand("pretrain", "Pre-training stage");
    pre->add_option("--config", config)->required();
    pre->add_option("--out", out, "checkpoint to write")->required();
    pre->add_option("--metrics", metrics, "JSONL metrics path");

    auto* meta = app.add_subcommand("metatrain", "Meta-training stage");
    meta->add_option("--config", config)->required();
    meta->add_option("--init", init, "pre-trained checkpoint")->required();
    meta->add_option("--out", out, "checkpoint to write")->required();
    meta->add_option("--metrics", metrics, "JSONL metrics path");

    auto* ev = app.add_subcommand("eval", "Few-shot evaluation on the target domain");
    ev->add_option("--config", config)->required();
    ev->add_option("--ckpt", ckpt)->required();
    ev->add_option("--episodes", episodes, "episode count (default: eval_episodes from the config)");
    ev->add_option("--metrics", metrics, "JSONL metrics path");
    ev->add_flag("--serial", serial, "run episodes on one thread");

    auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
    gc->add_option("--scale", scale)->check(CLI::IsMember({"tiny"}));

    CLI11_PARSE(app, argc, argv);
    try {
        if (*gen) return gen_data(spec, out, seed);
        if (*pre) return pretrain(config, out, metrics);
        if (*meta) return metatrain(config, init, out, metrics);
        if (*ev) return eval(config, ckpt, episodes, metrics, serial);
        if (*gc) return gradcheck(scale);
    } catch (const dmsd::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
