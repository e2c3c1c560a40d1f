// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <sstream>

#include "dmsd/dataset.hpp"
#include "dmsd/errors.hpp"
#include "dmsd/kv.hpp"

namespace dmsd {

namespace {

using Matrix = std::vector<double>;  // row-major D x D

}  // namespace

void check_synth_spec(const SynthSpec& s) {
    auto positive = [](std::size_t v, const char* name) {
        if (v == 0) throw SpecError(std::string("synthetic spec: ") + name + " must be positive");
    };
    positive(s.source_classes, "source_classes");
    positive(s.target_classes, "target_classes");
    positive(s.source_per_class, "source_per_class");
    positive(s.target_per_class, "target_per_class");
    positive(s.dim, "dim");
    if (s.frames < 2) throw SpecError("synthetic spec: frames must be at least 2");
    for (double v : {s.base_mean, s.proto_scale, s.drift_scale, s.instance_scale, s.noise, s.shift, s.rotation,
                     s.scale_spread, s.offset_scale}) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw SpecError("synthetic spec: scales must be finite and >= 0");
    }
    const std::size_t need = s.min_shot + s.min_query;
    if (s.source_per_class < need || s.target_per_class < need) {
        throw SpecError("synthetic spec: classes need at least " + std::to_string(need) +
                        " instances (min_shot + min_query), have source " + std::to_string(s.source_per_class) +
                        ", target " + std::to_string(s.target_per_class));
    }
}

namespace {

double to_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

struct ClassPattern {
    std::vector<double> proto;
    std::vector<double> drift;
};

std::vector<ClassPattern> make_patterns(const SynthSpec& s, std::size_t classes, Rng& rng) {
    std::vector<ClassPattern> out(classes);
    for (std::size_t c = 0; c < classes; ++c) {
        auto& p = out[c];
        if (s.paired_classes && c % 2 == 1) {
            p.proto = out[c - 1].proto;
            p.drift = out[c - 1].drift;
            for (double& v : p.drift) v = -v;
            continue;
        }
        p.proto.resize(s.dim);
        p.drift.resize(s.dim);
        for (double& v : p.proto) v = s.proto_scale * rng.normal();
        for (double& v : p.drift) v = s.drift_scale * rng.normal();
    }
    // Center the family so class patterns average out and the global feature
    // mean is the shared mean alone.
    for (auto member : {&ClassPattern::proto, &ClassPattern::drift}) {
        std::vector<double> avg(s.dim, 0.0);
        for (const auto& p : out)
            for (std::size_t d = 0; d < s.dim; ++d) avg[d] += (p.*member)[d] / static_cast<double>(classes);
        for (auto& p : out)
            for (std::size_t d = 0; d < s.dim; ++d) (p.*member)[d] -= avg[d];
    }
    return out;
}

Dataset make_family(const SynthSpec& s, const std::vector<double>& mu, std::size_t classes, std::size_t per_class,
                    Domain domain, std::uint32_t first_id, Rng& pattern_rng, Rng& video_rng) {
    const auto patterns = make_patterns(s, classes, pattern_rng);
    Dataset ds;
    ds.num_categories = classes;
    const char* prefix = domain == Domain::source ? "src_" : "tgt_";
    for (std::size_t c = 0; c < classes; ++c) ds.category_names.push_back(prefix + std::to_string(c));
    std::uint32_t id = first_id;
    const double denom = static_cast<double>(s.frames - 1);
    for (std::size_t c = 0; c < classes; ++c) {
        const auto& pat = patterns[c];
        for (std::size_t n = 0; n < per_class; ++n) {
            std::vector<double> inst(s.dim);
            for (double& v : inst) v = s.instance_scale * video_rng.normal();
            std::vector<double> values(s.frames * s.dim);
            for (std::size_t m = 0; m < s.frames; ++m) {
                const double t = 2.0 * static_cast<double>(m) / denom - 1.0;
                for (std::size_t d = 0; d < s.dim; ++d) {
                    values[m * s.dim + d] =
                        mu[d] + pat.proto[d] + t * pat.drift[d] + inst[d] + s.noise * video_rng.normal();
                }
            }
            VideoFeature v;
            v.id = id++;
            v.domain = domain;
            v.label = static_cast<std::uint32_t>(c);
            v.frames = Tensor::matrix(s.frames, s.dim, std::move(values));
            ds.videos.push_back(std::move(v));
        }
    }
    return ds;
}

/// Orthonormalizes the columns of a (modified Gram-Schmidt). The identity
/// maps to itself.
Matrix orthonormalize(Matrix a, std::size_t dim) {
    for (std::size_t j = 0; j < dim; ++j) {
        for (std::size_t k = 0; k < j; ++k) {
            double dot = 0.0;
            for (std::size_t i = 0; i < dim; ++i) dot += a[i * dim + j] * a[i * dim + k];
            for (std::size_t i = 0; i < dim; ++i) a[i * dim + j] -= dot * a[i * dim + k];
        }
        double norm = 0.0;
        for (std::size_t i = 0; i < dim; ++i) norm += a[i * dim + j] * a[i * dim + j];
        norm = std::sqrt(norm);
        if (!(norm > 1e-12)) throw SpecError("synthetic spec: degenerate rotation draw");
        for (std::size_t i = 0; i < dim; ++i) a[i * dim + j] /= norm;
    }
    return a;
}

}  // namespace

std::pair<Dataset, Dataset> gen_synthetic(const SynthSpec& s, std::uint64_t seed) {
    check_synth_spec(s);
    const std::size_t dim = s.dim;

    Rng mean_rng(mix_seed(seed, 0));
    std::vector<double> mu(dim);
    for (double& v : mu) v = s.base_mean * (0.5 + mean_rng.uniform());

    Rng src_patterns(mix_seed(seed, 1));
    Rng src_videos(mix_seed(seed, 2));
    Rng tgt_patterns(mix_seed(seed, 3));
    Rng tgt_videos(mix_seed(seed, 4));
    Rng shift_rng(mix_seed(seed, 5));

    Dataset source = make_family(s, mu, s.source_classes, s.source_per_class, Domain::source, 0, src_patterns,
                                 src_videos);
    Dataset target = make_family(s, mu, s.target_classes, s.target_per_class, Domain::target,
                                 static_cast<std::uint32_t>(source.size()), tgt_patterns, tgt_videos);

    // x -> R diag(scale) x + b
    Matrix basis(dim * dim);
    const double spread = s.shift * s.rotation / std::sqrt(static_cast<double>(dim));
    for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = 0; j < dim; ++j) basis[i * dim + j] = (i == j ? 1.0 : 0.0) + spread * shift_rng.normal();
    }
    const Matrix rot = orthonormalize(std::move(basis), dim);
    std::vector<double> scales(dim);
    for (double& v : scales) v = std::exp(s.shift * s.scale_spread * shift_rng.normal());
    std::vector<double> offset(dim);
    for (double& v : offset) v = s.shift * s.offset_scale * shift_rng.normal();

    for (auto& v : target.videos) {
        auto values = v.frames.mutable_data();
        std::vector<double> row(dim);
        for (std::size_t m = 0; m < s.frames; ++m) {
            double* x = values.data() + m * dim;
            for (std::size_t i = 0; i < dim; ++i) {
                double acc = offset[i];
                for (std::size_t j = 0; j < dim; ++j) acc += rot[i * dim + j] * scales[j] * x[j];
                row[i] = acc;
            }
            std::copy(row.begin(), row.end(), x);
        }
    }
    for (auto* ds : {&source, &target}) {
        for (auto& v : ds->videos) {
            for (double& x : v.frames.mutable_data()) x = to_f32(x);
        }
        validate(*ds);
    }
    return {std::move(source), std::move(target)};
}

void read_synth_spec(KeyValues& kv, SynthSpec& s, const std::string& prefix) {
    kv.read(prefix + "source_classes", s.source_classes);
    kv.read(prefix + "target_classes", s.target_classes);
    kv.read(prefix + "source_per_class", s.source_per_class);
    kv.read(prefix + "target_per_class", s.target_per_class);
    kv.read(prefix + "frames", s.frames);
    kv.read(prefix + "dim", s.dim);
    kv.read(prefix + "base_mean", s.base_mean);
    kv.read(prefix + "proto_scale", s.proto_scale);
    kv.read(prefix + "drift_scale", s.drift_scale);
    kv.read(prefix + "instance_scale", s.instance_scale);
    kv.read(prefix + "noise", s.noise);
    kv.read(prefix + "paired_classes", s.paired_classes);
    kv.read(prefix + "shift", s.shift);
    kv.read(prefix + "rotation", s.rotation);
    kv.read(prefix + "scale_spread", s.scale_spread);
    kv.read(prefix + "offset_scale", s.offset_scale);
    kv.read(prefix + "min_shot", s.min_shot);
    kv.read(prefix + "min_query", s.min_query);
}

SynthSpec parse_synth_spec(const std::string& text) {
    auto kv = KeyValues::parse(text);
    SynthSpec s;
    read_synth_spec(kv, s, "");
    kv.finish();
    check_synth_spec(s);
    return s;
}

std::string format_synth_spec(const SynthSpec& s) {
    std::ostringstream os;
    os.precision(17);
    os << "source_classes=" << s.source_classes << "\n"
       << "target_classes=" << s.target_classes << "\n"
       << "source_per_class=" << s.source_per_class << "\n"
       << "target_per_class=" << s.target_per_class << "\n"
       << "frames=" << s.frames << "\n"
       << "dim=" << s.dim << "\n"
       << "base_mean=" << s.base_mean << "\n"
       << "proto_scale=" << s.proto_scale << "\n"
       << "drift_scale=" << s.drift_scale << "\n"
       << "instance_scale=" << s.instance_scale << "\n"
       << "noise=" << s.noise << "\n"
       << "paired_classes=" << (s.paired_classes ? "true" : "false") << "\n"
       << "shift=" << s.shift << "\n"
       << "rotation=" << s.rotation << "\n"
       << "scale_spread=" << s.scale_spread << "\n"
       << "offset_scale=" << s.offset_scale << "\n"
       << "min_shot=" << s.min_shot << "\n"
       << "min_query=" << s.min_query << "\n";
    return os.str();
}

}  // namespace dmsd
