// SPDX-License-Identifier: Apache-2.0
#include <fstream>

#include "dmsd/checkpoint.hpp"
#include "dmsd/errors.hpp"
#include "dmsd/trainer.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace dmsd;

namespace {

std::vector<char> file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Checkpoint sample_checkpoint(std::size_t dim = 4, std::size_t classes = 3) {
    Rng rng(1);
    const Model m = Model::init(dim, 2 * dim, classes, rng);
    Checkpoint c;
    c.params = checkpoint_params(m.all());
    c.config_text = "dim=" + std::to_string(dim) + "\n";
    c.step = 1234;
    return c;
}

std::string error_of(const std::vector<std::uint8_t>& bytes) {
    try {
        parse_checkpoint(bytes);
    } catch (const FormatError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_SUITE("checkpoint") {

TEST_CASE("save, load, save is byte-identical") {
    const auto dir = testutil::temp_dir("ckpt");
    const auto c = sample_checkpoint();
    save_checkpoint(c, dir / "a.ckpt");
    const auto loaded = load_checkpoint(dir / "a.ckpt");
    save_checkpoint(loaded, dir / "b.ckpt");
    CHECK(file_bytes(dir / "a.ckpt") == file_bytes(dir / "b.ckpt"));
    CHECK(loaded.step == 1234);
    CHECK(loaded.config_text == c.config_text);
    REQUIRE(loaded.params.size() == c.params.size());
    for (std::size_t i = 0; i < c.params.size(); ++i) {
        CHECK(loaded.params.entries()[i].name == c.params.entries()[i].name);
        CHECK(loaded.params.entries()[i].tensor.shape() == c.params.entries()[i].tensor.shape());
        CHECK(loaded.params.entries()[i].tensor.to_vector() == c.params.entries()[i].tensor.to_vector());
    }
}

TEST_CASE("layout") {
    Checkpoint c;
    c.params.add("w", Tensor::matrix(1, 2, {1.0, -2.5}));
    c.step = 7;
    const auto b = serialize_checkpoint(c);
    // magic 8, version 4, count 4, name len 2 + 1, ndim 4, dims 8, values 8, step 8
    CHECK(b.size() == 8 + 4 + 4 + 3 + 4 + 8 + 8 + 8);
    CHECK(std::string(b.begin(), b.begin() + 8) == "DMSDCKPT");
    CHECK(b[8] == 1);
    CHECK(b[12] == 1);
    CHECK(b[b.size() - 8] == 7);
}

TEST_CASE("values are held at float32 precision") {
    ParamStore s;
    s.add("x", Tensor::vector({0.1, 1.0 / 3.0}));
    const auto r = checkpoint_params(s);
    CHECK(r.at("x").at(0) == static_cast<double>(0.1f));
    CHECK(r.at("x").at(1) == static_cast<double>(1.0f / 3.0f));
    Checkpoint c;
    c.params = r;
    CHECK(parse_checkpoint(serialize_checkpoint(c)).params.at("x").to_vector() == r.at("x").to_vector());
}

TEST_CASE("corrupt files are rejected with offsets") {
    const auto good = serialize_checkpoint(sample_checkpoint());
    {
        auto b = good;
        b[0] = 'X';
        CHECK(error_of(b).find("magic") != std::string::npos);
        CHECK(error_of(b).find("offset 0") != std::string::npos);
    }
    {
        auto b = good;
        b[8] = 2;
        CHECK(error_of(b).find("version") != std::string::npos);
        CHECK(error_of(b).find("offset 8") != std::string::npos);
    }
    {
        auto b = good;
        b.pop_back();
        CHECK(error_of(b).find("offset") != std::string::npos);
    }
    {
        auto b = good;
        b.push_back(0);
        CHECK(error_of(b).find("trailing") != std::string::npos);
    }
    {
        // Huge first dimension of the first entry.
        auto b = good;
        const std::size_t name_len = b[16] | (b[17] << 8);
        const std::size_t dims_at = 16 + 2 + name_len + 4;
        b[dims_at + 3] = 0x7f;
        CHECK(error_of(b).find("larger than the file") != std::string::npos);
    }
    {
        auto b = good;
        const std::size_t name_len = b[16] | (b[17] << 8);
        const std::size_t ndim_at = 16 + 2 + name_len;
        b[ndim_at] = 0;
        CHECK(error_of(b).find("ndim") != std::string::npos);
    }
    {
        Checkpoint c;
        c.params.add("w", Tensor::vector({std::numeric_limits<double>::infinity()}));
        CHECK(error_of(serialize_checkpoint(c)).find("non-finite") != std::string::npos);
    }
    CHECK(error_of({}).find("magic") != std::string::npos);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/x.ckpt"), FormatError);
}

TEST_CASE("shape checks against the config") {
    const auto c = sample_checkpoint(4, 3);
    CHECK_NOTHROW(check_checkpoint_shapes(c, 4, 8, 3));
    CHECK_THROWS_AS(check_checkpoint_shapes(c, 5, 10, 3), StructuralError);
    CHECK_THROWS_AS(check_checkpoint_shapes(c, 4, 8, 4), StructuralError);
    CHECK_THROWS_AS(check_checkpoint_shapes(c, 4, 6, 3), StructuralError);
    auto missing = c;
    missing.params.entries().pop_back();
    CHECK_THROWS_AS(check_checkpoint_shapes(missing, 4, 8, 3), StructuralError);
    auto off = c;
    off.params.at("dme.w_q") = Tensor::zeros({4, 3});
    CHECK_THROWS_AS(check_checkpoint_shapes(off, 4, 8, 3), StructuralError);
}

}  // TEST_SUITE
