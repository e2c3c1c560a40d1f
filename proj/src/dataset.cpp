// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <fstream>
#include <limits>

#include "bytes.hpp"
#include "dmsd/dataset.hpp"
#include "dmsd/errors.hpp"

namespace dmsd {

namespace bytes {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw FormatError("write failed for " + path.string());
}

}  // namespace bytes

namespace {
constexpr std::string_view kMagic = "DMF1";
constexpr std::uint32_t kVersion = 1;
}  // namespace

void validate(const Dataset& ds) {
    for (const auto& v : ds.videos) {
        const std::string where = "video " + std::to_string(v.id);
        if (!v.frames.defined() || v.frames.ndim() != 2) throw DataError(where + ": frames must be a matrix");
        if (v.num_frames() < 2) throw DataError(where + ": needs at least 2 frames");
        for (double x : v.frames.data()) {
            if (!std::isfinite(x)) throw DataError(where + ": non-finite feature value");
        }
        if (v.domain == Domain::source && !v.label) throw DataError(where + ": source video without a label");
        if (v.label && *v.label >= ds.num_categories) {
            throw DataError(where + ": label " + std::to_string(*v.label) + " outside [0, " +
                            std::to_string(ds.num_categories) + ")");
        }
    }
}

std::vector<std::vector<std::size_t>> videos_by_class(const Dataset& ds) {
    std::vector<std::vector<std::size_t>> out(ds.num_categories);
    for (std::size_t i = 0; i < ds.videos.size(); ++i) {
        if (ds.videos[i].label) out[*ds.videos[i].label].push_back(i);
    }
    return out;
}

std::vector<std::uint8_t> serialize_features(const Dataset& ds) {
    bytes::Writer w;
    w.raw(kMagic);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(ds.videos.size()));
    for (const auto& v : ds.videos) {
        w.u32(v.id);
        w.i32(v.label ? static_cast<std::int32_t>(*v.label) : -1);
        w.u8(static_cast<std::uint8_t>(v.domain));
        w.u32(static_cast<std::uint32_t>(v.num_frames()));
        w.u32(static_cast<std::uint32_t>(v.dim()));
        for (double x : v.frames.data()) {
            const float f = static_cast<float>(x);
            if (!std::isfinite(f)) throw DataError("video " + std::to_string(v.id) + ": value not representable as float32");
            w.f32(f);
        }
    }
    return std::move(w.buffer());
}

void save_features(const Dataset& ds, const std::filesystem::path& path) {
    bytes::write_file(path, serialize_features(ds));
}

Dataset parse_features(std::span<const std::uint8_t> data) {
    bytes::Reader r(data, "DMF1");
    if (r.raw(kMagic.size()) != kMagic) r.fail("bad magic (expected \"DMF1\")", 0);
    const auto version_at = r.offset();
    if (const auto version = r.u32(); version != kVersion) {
        r.fail("unsupported version " + std::to_string(version), version_at);
    }
    const std::uint32_t count = r.u32();
    Dataset ds;
    std::uint32_t max_label = 0;
    bool any_label = false;
    for (std::uint32_t n = 0; n < count; ++n) {
        const auto start = r.offset();
        VideoFeature v;
        v.id = r.u32();
        const std::int32_t label = r.i32();
        const auto domain_at = r.offset();
        const std::uint8_t domain = r.u8();
        if (domain > 1) r.fail("invalid domain tag " + std::to_string(domain), domain_at);
        v.domain = static_cast<Domain>(domain);
        if (label < -1) r.fail("invalid label " + std::to_string(label), start + 4);
        if (label >= 0) {
            v.label = static_cast<std::uint32_t>(label);
            max_label = std::max(max_label, *v.label);
            any_label = true;
        }
        const std::uint32_t m = r.u32();
        const std::uint32_t d = r.u32();
        if (m < 2 || d < 1) {
            throw DataError("DMF1: video " + std::to_string(v.id) + " at offset " + std::to_string(start) +
                            " has invalid shape " + std::to_string(m) + "x" + std::to_string(d));
        }
        const std::size_t n_values = static_cast<std::size_t>(m) * d;
        r.need(n_values * 4, "frame values");
        std::vector<double> values(n_values);
        for (auto& x : values) {
            const auto at = r.offset();
            const float f = r.f32();
            if (!std::isfinite(f)) {
                throw DataError("DMF1: non-finite value in video " + std::to_string(v.id) + " at offset " +
                                std::to_string(at));
            }
            x = static_cast<double>(f);
        }
        v.frames = Tensor::matrix(m, d, std::move(values));
        ds.videos.push_back(std::move(v));
    }
    r.expect_end();
    ds.num_categories = any_label ? static_cast<std::size_t>(max_label) + 1 : 0;
    for (std::size_t c = 0; c < ds.num_categories; ++c) ds.category_names.push_back("class_" + std::to_string(c));
    validate(ds);
    return ds;
}

Dataset load_features(const std::filesystem::path& path) {
    const auto data = bytes::read_file(path);
    return parse_features(data);
}

}  // namespace dmsd
