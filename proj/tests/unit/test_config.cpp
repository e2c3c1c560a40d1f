// SPDX-License-Identifier: Apache-2.0
#include <fstream>

#include "dmsd/config.hpp"
#include "dmsd/errors.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace dmsd;

TEST_SUITE("config") {

TEST_CASE("defaults") {
    const Config c = parse_config("");
    CHECK(c.way == 5);
    CHECK(c.shot == 1);
    CHECK(c.query == 5);
    CHECK(c.unlabeled == 5);
    CHECK(c.frames == 8);
    CHECK(c.dim == 32);
    CHECK(c.hidden() == 64);
    CHECK(c.adam.lr == 0.001);
    CHECK(c.accum_steps == 16);
    CHECK(c.pretrain_episodes == 500);
    CHECK(c.ema_alpha == 0.999);
    CHECK(c.gamma == 0.1);
    CHECK(c.tau == 1.0);
    for (double a : c.alphas) CHECK(a == 1.0);
    CHECK(c.center_mode() == CenterMode::calibrated);
    CHECK(c.synth.frames == 8);
    CHECK(c.synth.dim == 32);
}

TEST_CASE("values, comments and synthetic keys") {
    const Config c = parse_config(
        "# desk run\n"
        "way = 3\n"
        "dim=16   # smaller\n"
        "alpha4=0\n"
        "use_icc=false\n"
        "synth.shift=0\n"
        "synth.source_classes=6\n"
        "eval_seed=99\n");
    CHECK(c.way == 3);
    CHECK(c.dim == 16);
    CHECK(c.synth.dim == 16);
    CHECK(c.alphas[3] == 0.0);
    CHECK(c.center_mode() == CenterMode::mean);
    CHECK(c.synth.shift == 0.0);
    CHECK(c.synth.source_classes == 6);
    CHECK(c.eval_seed_value() == 99);
    CHECK(c.data_seed_value() == mix_seed(1, 11));
    CHECK(parse_config("icc_literal=true").center_mode() == CenterMode::literal);
}

TEST_CASE("unknown and malformed keys are rejected") {
    CHECK_THROWS_AS(parse_config("wya=5"), ConfigError);
    CHECK_THROWS_AS(parse_config("synth.nosie=1"), ConfigError);
    CHECK_THROWS_AS(parse_config("way"), ConfigError);
    CHECK_THROWS_AS(parse_config("way=5\nway=6"), ConfigError);
    CHECK_THROWS_AS(parse_config("way=five"), ConfigError);
    CHECK_THROWS_AS(parse_config("way=-1"), ConfigError);
    CHECK_THROWS_AS(parse_config("gamma=0.1x"), ConfigError);
    CHECK_THROWS_AS(parse_config("open_ends=maybe"), ConfigError);
    try {
        parse_config("way=5\nbogus=1\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("bogus") != std::string::npos);
    }
}

TEST_CASE("out-of-range values") {
    for (const char* text : {"way=0", "frames=1", "unlabeled=1", "alpha2=-1", "ema_alpha=1.5", "tau=0", "gamma=-0.1",
                             "lr=0", "accum_steps=0", "source_file=a.dmf1", "adam_beta1=1"}) {
        INFO(text);
        CHECK_THROWS_AS(parse_config(text), ConfigError);
    }
    CHECK_THROWS_AS(parse_config("synth.noise=-1"), SpecError);
}

TEST_CASE("format round trip") {
    Config c = parse_config("way=4\nshot=2\ngamma=0.123456789012345\nalpha3=0.25\nuse_mixed_branch=false\nseed=42\n"
                            "split_seed=7\nsynth.noise=0.75\nrecord_wall_time=false\n");
    const std::string text = format_config(c);
    const Config d = parse_config(text);
    CHECK(format_config(d) == text);
    CHECK(d.gamma == c.gamma);
    CHECK(d.shot == 2);
    CHECK(d.split_seed == std::optional<std::uint64_t>(7));
    CHECK_FALSE(d.data_seed.has_value());
    CHECK(d.synth.noise == 0.75);
    CHECK_FALSE(d.use_mixed_branch);
}

TEST_CASE("data paths resolve against the config directory") {
    const auto dir = testutil::temp_dir("config");
    {
        std::ofstream(dir / "run.cfg") << "source_file=src.dmf1\ntarget_file=/abs/tgt.dmf1\n";
    }
    const Config c = load_config((dir / "run.cfg").string());
    CHECK(c.source_file == (dir / "src.dmf1").string());
    CHECK(c.target_file == "/abs/tgt.dmf1");
    CHECK_THROWS_AS(load_config((dir / "missing.cfg").string()), ConfigError);
}

}  // TEST_SUITE
