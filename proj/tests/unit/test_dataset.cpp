// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstring>
#include <limits>
#include <set>

#include "dmsd/dataset.hpp"
#include "dmsd/errors.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace dmsd;

namespace {

Dataset two_videos(std::size_t m, std::size_t d) {
    Rng rng(3);
    Dataset ds;
    ds.num_categories = 2;
    for (std::uint32_t i = 0; i < 2; ++i) {
        VideoFeature v;
        v.id = 10 + i;
        v.domain = Domain::source;
        v.label = i;
        std::vector<double> x(m * d);
        for (double& e : x) e = static_cast<float>(rng.normal());
        v.frames = Tensor::matrix(m, d, std::move(x));
        ds.videos.push_back(std::move(v));
    }
    return ds;
}

/// Little-endian header for hand-built files.
std::vector<std::uint8_t> header(std::uint32_t version, std::uint32_t count) {
    std::vector<std::uint8_t> b{'D', 'M', 'F', '1'};
    for (std::uint32_t v : {version, count})
        for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    return b;
}

std::vector<double> global_mean(const Dataset& ds) {
    const std::size_t d = ds.videos[0].dim();
    std::vector<double> mu(d, 0.0);
    std::size_t rows = 0;
    for (const auto& v : ds.videos) {
        const auto x = v.frames.data();
        for (std::size_t i = 0; i < x.size(); ++i) mu[i % d] += x[i];
        rows += v.num_frames();
    }
    for (double& e : mu) e /= static_cast<double>(rows);
    return mu;
}

std::vector<double> video_mean(const VideoFeature& v) {
    std::vector<double> mu(v.dim(), 0.0);
    const auto x = v.frames.data();
    for (std::size_t i = 0; i < x.size(); ++i) mu[i % v.dim()] += x[i] / static_cast<double>(v.num_frames());
    return mu;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    return ab / std::sqrt(aa * bb);
}

double dist2(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

bool same_data(const Dataset& a, const Dataset& b) {
    if (a.size() != b.size() || a.num_categories != b.num_categories) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& x = a.videos[i];
        const auto& y = b.videos[i];
        if (x.id != y.id || x.label != y.label || x.domain != y.domain || x.frames.shape() != y.frames.shape()) return false;
        if (std::memcmp(x.frames.data().data(), y.frames.data().data(), x.frames.size() * sizeof(double)) != 0) return false;
    }
    return true;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("DMF1 with two 8x512 videos") {
    const auto ds = two_videos(8, 512);
    const auto dir = testutil::temp_dir("dmf1");
    save_features(ds, dir / "two.dmf1");
    const auto back = load_features(dir / "two.dmf1");
    REQUIRE(back.size() == 2);
    for (const auto& v : back.videos) CHECK(v.frames.shape() == Shape{8, 512});
    CHECK(same_data(ds, back));
    // 12-byte header, then 17 bytes of metadata plus 4*M*D payload per video.
    CHECK(std::filesystem::file_size(dir / "two.dmf1") == 12 + 2 * (17 + 4 * 8 * 512));
}

TEST_CASE("DMF1 empty body") {
    const auto ds = parse_features(header(1, 0));
    CHECK(ds.empty());
    CHECK(ds.num_categories == 0);
}

TEST_CASE("DMF1 round trip is byte-exact") {
    const auto [src, tgt] = gen_synthetic(SynthSpec{}, 5);
    for (const Dataset* ds : {&src, &tgt}) {
        const auto bytes = serialize_features(*ds);
        const auto back = parse_features(bytes);
        CHECK(same_data(*ds, back));
        CHECK(serialize_features(back) == bytes);
    }
}

TEST_CASE("DMF1 rejects corrupt input with offsets") {
    const auto good = serialize_features(two_videos(3, 2));
    auto bad_magic = good;
    bad_magic[0] = 'X';
    CHECK_THROWS_WITH_AS(parse_features(bad_magic), doctest::Contains("offset 0"), FormatError);
    auto bad_version = good;
    bad_version[4] = 2;
    CHECK_THROWS_WITH_AS(parse_features(bad_version), doctest::Contains("version"), FormatError);
    auto truncated = good;
    truncated.resize(good.size() - 3);
    CHECK_THROWS_WITH_AS(parse_features(truncated), doctest::Contains("truncated"), FormatError);
    auto trailing = good;
    trailing.push_back(0);
    CHECK_THROWS_WITH_AS(parse_features(trailing), doctest::Contains("trailing"), FormatError);
    CHECK_THROWS_AS(parse_features(std::vector<std::uint8_t>{'D', 'M'}), FormatError);

    // Overwrite the first float of the first video with NaN.
    auto nan_value = good;
    const float nan = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(nan_value.data() + 12 + 17, &nan, 4);
    CHECK_THROWS_AS(parse_features(nan_value), DataError);
    auto bad_domain = good;
    bad_domain[12 + 8] = 7;
    CHECK_THROWS_AS(parse_features(bad_domain), FormatError);
    // Source video without a label.
    auto unlabeled_source = good;
    for (int i = 0; i < 4; ++i) unlabeled_source[12 + 4 + i] = 0xFF;
    CHECK_THROWS_AS(parse_features(unlabeled_source), DataError);
    // One frame is not a video.
    auto one_frame = good;
    one_frame[12 + 9] = 1;
    CHECK_THROWS_AS(parse_features(one_frame), DataError);
}

TEST_CASE("unlabeled target videos survive the format") {
    Dataset ds = two_videos(2, 3);
    for (auto& v : ds.videos) v.domain = Domain::target;
    ds.videos[1].label.reset();
    const auto back = parse_features(serialize_features(ds));
    CHECK(back.videos[0].label == 0u);
    CHECK_FALSE(back.videos[1].label.has_value());
}

TEST_CASE("synthetic data: no shift keeps the domains aligned") {
    SynthSpec spec;
    spec.shift = 0.0;
    const auto [src, tgt] = gen_synthetic(spec, 11);
    CHECK(cosine(global_mean(src), global_mean(tgt)) > 0.9);
}

TEST_CASE("synthetic data: a large shift makes the domains separable") {
    SynthSpec spec;
    spec.shift = 2.0;
    const auto [src, tgt] = gen_synthetic(spec, 12);
    const auto cs = global_mean(src);
    const auto ct = global_mean(tgt);
    std::size_t correct = 0, total = 0;
    for (const Dataset* ds : {&src, &tgt}) {
        for (const auto& v : ds->videos) {
            const auto mu = video_mean(v);
            const bool says_source = dist2(mu, cs) <= dist2(mu, ct);
            correct += says_source == (v.domain == Domain::source) ? 1 : 0;
            ++total;
        }
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(total) > 0.95);
}

TEST_CASE("synthetic data is deterministic and well-formed") {
    SynthSpec spec;
    const auto [s1, t1] = gen_synthetic(spec, 3);
    const auto [s2, t2] = gen_synthetic(spec, 3);
    const auto [s3, t3] = gen_synthetic(spec, 4);
    CHECK(same_data(s1, s2));
    CHECK(same_data(t1, t2));
    CHECK_FALSE(same_data(s1, s3));
    CHECK(s1.size() == spec.source_classes * spec.source_per_class);
    CHECK(t1.size() == spec.target_classes * spec.target_per_class);
    std::set<std::uint32_t> ids;
    for (const Dataset* ds : {&s1, &t1}) {
        for (const auto& v : ds->videos) {
            CHECK(v.frames.shape() == Shape{spec.frames, spec.dim});
            CHECK(v.label.has_value());
            ids.insert(v.id);
        }
    }
    CHECK(ids.size() == s1.size() + t1.size());
}

TEST_CASE("synthetic spec validation") {
    SynthSpec spec;
    spec.min_shot = 5;
    spec.min_query = 20;
    CHECK_THROWS_AS(gen_synthetic(spec, 1), SpecError);
    spec = SynthSpec{};
    spec.frames = 1;
    CHECK_THROWS_AS(gen_synthetic(spec, 1), SpecError);
    spec = SynthSpec{};
    spec.noise = -1;
    CHECK_THROWS_AS(gen_synthetic(spec, 1), SpecError);
    CHECK_THROWS_AS(parse_synth_spec("bogus=1\n"), ConfigError);
    const auto parsed = parse_synth_spec("dim=16\nshift=0.5\n# comment\npaired_classes=false\n");
    CHECK(parsed.dim == 16);
    CHECK(parsed.shift == 0.5);
    CHECK_FALSE(parsed.paired_classes);
    const auto again = parse_synth_spec(format_synth_spec(parsed));
    CHECK(format_synth_spec(again) == format_synth_spec(parsed));
}

TEST_CASE("paired classes differ only in frame order") {
    SynthSpec spec;
    spec.noise = 0;
    spec.instance_scale = 0;
    spec.shift = 0;
    const auto [src, tgt] = gen_synthetic(spec, 8);
    const auto by_class = videos_by_class(src);
    const auto& a = src.videos[by_class[0][0]];
    const auto& b = src.videos[by_class[1][0]];
    // Class 1 is class 0 played backwards.
    const std::size_t m = a.num_frames(), d = a.dim();
    double diff = 0.0;
    for (std::size_t f = 0; f < m; ++f)
        for (std::size_t k = 0; k < d; ++k) diff += std::abs(a.frames.at(f * d + k) - b.frames.at((m - 1 - f) * d + k));
    CHECK(diff < 1e-4);
    CHECK(testutil::max_abs_diff(video_mean(a), video_mean(b)) < 1e-5);
}

TEST_CASE("target split") {
    Dataset target;
    target.num_categories = 4;
    for (std::uint32_t i = 0; i < 100; ++i) {
        VideoFeature v;
        v.id = 1000 + i;
        v.domain = Domain::target;
        v.label = i % 4;
        v.frames = Tensor::full({2, 1}, i);
        target.videos.push_back(v);
    }
    const auto split = split_target(target, {0.5, 0.25, 0.25}, 9);
    CHECK(split.u_train.size() == 50);
    CHECK(split.lt.size() == 25);
    CHECK(split.ut.size() == 25);
    std::set<std::uint32_t> ids;
    for (const auto& u : split.u_train) ids.insert(u.id);
    for (const auto& v : split.lt.videos) ids.insert(v.id);
    for (const auto& v : split.ut.videos) ids.insert(v.id);
    CHECK(ids.size() == 100);
    CHECK(*ids.begin() == 1000);
    CHECK(*ids.rbegin() == 1099);
    // UnlabeledVideo has no label field at all; the stratification keeps every class in both labeled pools.
    for (const Dataset* pool : {&split.lt, &split.ut}) {
        const auto by_class = videos_by_class(*pool);
        for (const auto& members : by_class) CHECK(members.size() >= 5);
    }
    CHECK_THROWS_AS(split_target(target, {0.5, 0.5, 0.5}, 1), SpecError);
    CHECK_THROWS_AS(split_target(target, {1.0, 0.0, 0.0}, 1), SpecError);
    Dataset unlabeled = target;
    unlabeled.videos[3].label.reset();
    CHECK_THROWS_AS(split_target(unlabeled, {0.5, 0.25, 0.25}, 1), SpecError);
    // Same seed, same split.
    const auto again = split_target(target, {0.5, 0.25, 0.25}, 9);
    for (std::size_t i = 0; i < 50; ++i) CHECK(again.u_train[i].id == split.u_train[i].id);
}

}  // TEST_SUITE
