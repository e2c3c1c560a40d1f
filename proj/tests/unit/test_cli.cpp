// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "dmsd/checkpoint.hpp"
#include "dmsd/dataset.hpp"
#include "dmsd/metrics.hpp"
#include "doctest.h"
#include "test_util.hpp"

namespace {

struct Result {
    int code = -1;
    std::string output;
};

/// Runs the CLI with stdout and stderr captured together.
Result run(const std::string& args) {
    const std::string cmd = std::string(DMSD_CLI_PATH) + " " + args + " 2>&1";
    Result r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[512];
    while (std::fgets(buf, sizeof buf, pipe)) r.output += buf;
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

void write(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

std::vector<std::string> lines(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

const char* kSpec =
    "source_classes=8\ntarget_classes=6\nsource_per_class=8\ntarget_per_class=16\nframes=4\ndim=8\n";

const char* kConfig =
    "frames=4\ndim=8\nsource_file=data/source.dmf1\ntarget_file=data/target.dmf1\n"
    "pretrain_episodes=12\nmetatrain_episodes=12\naccum_steps=4\neval_episodes=30\nrecord_wall_time=false\n";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("full pipeline through the command line") {
    const auto dir = testutil::temp_dir("cli");
    write(dir / "spec.txt", kSpec);
    write(dir / "run.cfg", kConfig);
    const auto d = dir.string();

    auto r = run("gen-data --spec " + d + "/spec.txt --out " + d + "/data --seed 3");
    INFO(r.output);
    REQUIRE(r.code == 0);
    const auto source = dmsd::load_features(dir / "data" / "source.dmf1");
    CHECK(source.size() == 64);
    CHECK(dmsd::load_features(dir / "data" / "target.dmf1").size() == 96);

    r = run("pretrain --config " + d + "/run.cfg --out " + d + "/pre.ckpt --metrics " + d + "/pre.jsonl");
    INFO(r.output);
    REQUIRE(r.code == 0);
    const auto pre_lines = lines(dir / "pre.jsonl");
    CHECK(pre_lines.size() == 12);
    for (const auto& l : pre_lines) CHECK(dmsd::parse_json_line(l).stage == "pretrain");
    CHECK(dmsd::load_checkpoint(dir / "pre.ckpt").step == 12);

    r = run("metatrain --config " + d + "/run.cfg --init " + d + "/pre.ckpt --out " + d + "/meta.ckpt --metrics " + d +
            "/meta.jsonl");
    INFO(r.output);
    REQUIRE(r.code == 0);
    CHECK(lines(dir / "meta.jsonl").size() == 12);
    CHECK(dmsd::load_checkpoint(dir / "meta.ckpt").step == 24);

    r = run("eval --config " + d + "/run.cfg --ckpt " + d + "/meta.ckpt --episodes 40 --metrics " + d + "/eval.jsonl");
    INFO(r.output);
    REQUIRE(r.code == 0);
    CHECK(r.output.find("5-way 1-shot accuracy over 40 episodes") != std::string::npos);
    const auto ev = lines(dir / "eval.jsonl");
    REQUIRE(ev.size() == 1);
    const auto rec = dmsd::parse_json_line(ev[0]);
    CHECK(rec.stage == "eval");
    REQUIRE(rec.eval_accuracy.has_value());

    // Serial evaluation prints the same numbers.
    const auto serial = run("eval --serial --config " + d + "/run.cfg --ckpt " + d + "/meta.ckpt --episodes 40");
    CHECK(serial.output == r.output);

    // Reruns reproduce the checkpoint bytes.
    REQUIRE(run("metatrain --config " + d + "/run.cfg --init " + d + "/pre.ckpt --out " + d + "/again.ckpt").code == 0);
    std::ifstream a(dir / "meta.ckpt", std::ios::binary), b(dir / "again.ckpt", std::ios::binary);
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    CHECK(sa.str() == sb.str());
}

TEST_CASE("errors are reported, not crashed on") {
    const auto dir = testutil::temp_dir("cli_err");
    const auto d = dir.string();
    write(dir / "bad.cfg", "way=5\nwya=4\n");
    auto r = run("pretrain --config " + d + "/bad.cfg --out " + d + "/x.ckpt");
    CHECK(r.code == 2);
    CHECK(r.output.find("unknown keys: wya") != std::string::npos);

    write(dir / "ok.cfg", "pretrain_episodes=1\n");
    write(dir / "junk.ckpt", "DMSDCKPX");
    r = run("eval --config " + d + "/ok.cfg --ckpt " + d + "/junk.ckpt --episodes 1");
    CHECK(r.code == 2);
    CHECK(r.output.find("magic") != std::string::npos);
    CHECK(r.output.find("offset 0") != std::string::npos);

    write(dir / "spec.txt", "dim=0\n");
    CHECK(run("gen-data --spec " + d + "/spec.txt --out " + d + "/data").code == 2);
    CHECK(run("gradcheck --scale huge").code != 0);
    CHECK(run("").code != 0);
}

TEST_CASE("gradcheck subcommand") {
    const auto r = run("gradcheck --scale tiny");
    INFO(r.output);
    CHECK(r.code == 0);
    CHECK(r.output.find("all passed") != std::string::npos);
    CHECK(r.output.find("FAIL") == std::string::npos);
}

}  // TEST_SUITE
