// SPDX-License-Identifier: Apache-2.0
#include "dmsd/checkpoint.hpp"

#include <cmath>
#include <limits>

#include "bytes.hpp"
#include "dmsd/errors.hpp"

namespace dmsd {

namespace {

constexpr std::string_view kMagic = "DMSDCKPT";
constexpr const char* kConfigEntry = "meta.config";
constexpr std::uint32_t kMaxDims = 8;

std::vector<std::pair<std::string, Shape>> expected_entries(std::size_t dim, std::size_t hidden,
                                                            std::size_t classes) {
    std::vector<std::pair<std::string, Shape>> out;
    for (const char* block : {"dte.", "dtd.", "dme."}) {
        const std::string b(block);
        for (const char* proj : {"q", "k", "v"}) {
            out.emplace_back(b + "w_" + proj, Shape{dim, dim});
            out.emplace_back(b + "b_" + proj, Shape{dim});
        }
        out.emplace_back(b + "ffn_w1", Shape{dim, hidden});
        out.emplace_back(b + "ffn_b1", Shape{hidden});
        out.emplace_back(b + "ffn_w2", Shape{hidden, dim});
        out.emplace_back(b + "ffn_b2", Shape{dim});
    }
    out.emplace_back("head.cls_w", Shape{dim, classes});
    out.emplace_back("head.cls_b", Shape{classes});
    return out;
}

}  // namespace

ParamStore checkpoint_params(const ParamStore& store) {
    ParamStore out;
    for (const auto& e : store.entries()) {
        std::vector<double> values(e.tensor.data().begin(), e.tensor.data().end());
        for (double& v : values) v = static_cast<double>(static_cast<float>(v));
        out.add(e.name, Tensor::from(e.tensor.shape(), std::move(values)));
    }
    return out;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
    bytes::Writer w;
    w.raw(kMagic);
    w.u32(kCheckpointVersion);
    const bool has_config = !ckpt.config_text.empty();
    w.u32(static_cast<std::uint32_t>(ckpt.params.size() + (has_config ? 1 : 0)));
    auto entry_header = [&](const std::string& name, const Shape& shape) {
        if (name.size() > std::numeric_limits<std::uint16_t>::max()) throw FormatError("entry name too long");
        w.u16(static_cast<std::uint16_t>(name.size()));
        w.raw(name);
        w.u32(static_cast<std::uint32_t>(shape.size()));
        for (auto d : shape) w.u32(static_cast<std::uint32_t>(d));
    };
    for (const auto& e : ckpt.params.entries()) {
        entry_header(e.name, e.tensor.shape());
        for (double v : e.tensor.data()) w.f32(static_cast<float>(v));
    }
    if (has_config) {
        // The snapshot travels as one float per byte so the file stays a flat list of tensors.
        entry_header(kConfigEntry, Shape{ckpt.config_text.size()});
        for (unsigned char ch : ckpt.config_text) w.f32(static_cast<float>(ch));
    }
    w.u64(ckpt.step);
    return std::move(w.buffer());
}

Checkpoint parse_checkpoint(std::span<const std::uint8_t> data) {
    bytes::Reader r(data, "checkpoint");
    if (r.remaining() < kMagic.size() || r.raw(kMagic.size()) != kMagic) r.fail("bad magic (expected DMSDCKPT)", 0);
    const std::size_t version_at = r.offset();
    const auto version = r.u32();
    if (version != kCheckpointVersion) {
        r.fail("unsupported version " + std::to_string(version), version_at);
    }
    const auto count = r.u32();
    Checkpoint ckpt;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::size_t entry_at = r.offset();
        const auto name_len = r.u16();
        std::string name = r.raw(name_len);
        if (name.empty()) r.fail("empty entry name", entry_at);
        const std::size_t ndim_at = r.offset();
        const auto ndim = r.u32();
        if (ndim == 0 || ndim > kMaxDims) r.fail("entry '" + name + "' has ndim " + std::to_string(ndim), ndim_at);
        Shape shape;
        std::size_t n = 1;
        for (std::uint32_t k = 0; k < ndim; ++k) {
            const std::size_t dim_at = r.offset();
            const auto d = r.u32();
            if (d == 0) r.fail("entry '" + name + "' has a zero dimension", dim_at);
            if (n > r.remaining() / d) r.fail("entry '" + name + "' is larger than the file", dim_at);
            n *= d;
            shape.push_back(d);
        }
        r.need(4 * n, "values");
        const std::size_t values_at = r.offset();
        std::vector<double> values(n);
        for (double& v : values) v = r.f32();
        if (name == kConfigEntry) {
            if (ndim != 1) r.fail("config entry must be 1-D", ndim_at);
            std::string text;
            for (double v : values) {
                if (!(v >= 0.0 && v <= 255.0) || v != std::floor(v)) r.fail("config entry holds a non-byte", values_at);
                text.push_back(static_cast<char>(static_cast<unsigned char>(v)));
            }
            ckpt.config_text = std::move(text);
            continue;
        }
        for (double v : values) {
            if (!std::isfinite(v)) r.fail("entry '" + name + "' holds a non-finite value", values_at);
        }
        if (ckpt.params.contains(name)) r.fail("duplicate entry '" + name + "'", entry_at);
        ckpt.params.add(std::move(name), Tensor::from(std::move(shape), std::move(values)));
    }
    ckpt.step = r.u64();
    r.expect_end();
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    bytes::write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const auto data = bytes::read_file(path);
    try {
        return parse_checkpoint(data);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void check_checkpoint_shapes(const Checkpoint& ckpt, std::size_t dim, std::size_t hidden, std::size_t num_classes) {
    const auto expected = expected_entries(dim, hidden, num_classes);
    std::string problems;
    auto note = [&](const std::string& msg) { problems += (problems.empty() ? "" : "; ") + msg; };
    for (const auto& [name, shape] : expected) {
        if (!ckpt.params.contains(name)) {
            note("missing " + name);
        } else if (ckpt.params.at(name).shape() != shape) {
            note(name + " is " + shape_str(ckpt.params.at(name).shape()) + ", expected " + shape_str(shape));
        }
    }
    if (ckpt.params.size() != expected.size()) {
        for (const auto& e : ckpt.params.entries()) {
            bool known = false;
            for (const auto& [name, shape] : expected) known = known || name == e.name;
            if (!known) note("unexpected entry " + e.name);
        }
    }
    if (!problems.empty()) {
        throw StructuralError("checkpoint does not match config (D=" + std::to_string(dim) + ", hidden=" +
                              std::to_string(hidden) + ", classes=" + std::to_string(num_classes) + "): " + problems);
    }
}

}  // namespace dmsd
