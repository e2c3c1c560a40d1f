// SPDX-License-Identifier: Apache-2.0
#include "dmsd/domain_mixer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dmsd/errors.hpp"

namespace dmsd {

namespace {

constexpr double kMinWeightSum = 1e-8;

double flat_cosine(std::span<const double> a, std::span<const double> b, double na, double nb) {
    double dot = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) dot += a[k] * b[k];
    return dot / (na * nb);
}

}  // namespace

CalibratedCenter icc_center(std::span<const Tensor> targets, CenterMode mode) {
    const std::size_t n = targets.size();
    if (n < 2) throw DegenerateInputError("icc_center: needs at least 2 instances, got " + std::to_string(n));
    const Shape& shape = targets[0].shape();
    const std::size_t len = targets[0].size();
    for (const auto& t : targets) {
        if (t.shape() != shape) throw ShapeError("icc_center: instances differ in shape");
    }

    // Canonical order: lexicographic on values. Equal instances are
    // interchangeable, so ties do not affect the result.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto da = targets[a].data();
        const auto db = targets[b].data();
        return std::lexicographical_compare(da.begin(), da.end(), db.begin(), db.end());
    });

    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (double x : targets[i].data()) s += x * x;
        if (!(s > 0.0)) throw DegenerateInputError("icc_center: zero-norm instance");
        norms[i] = std::sqrt(s);
    }

    CalibratedCenter out;
    out.weights.assign(n, 1.0);
    std::vector<double> center(len, 0.0);

    auto weighted_sum = [&](std::size_t count, double divisor) {
        // Sums over the first `count` instances in canonical order.
        std::fill(center.begin(), center.end(), 0.0);
        for (std::size_t r = 0; r < count; ++r) {
            const std::size_t i = order[r];
            const auto d = targets[i].data();
            for (std::size_t k = 0; k < len; ++k) center[k] += out.weights[i] * d[k];
        }
        for (double& c : center) c /= divisor;
    };

    switch (mode) {
        case CenterMode::mean:
            weighted_sum(n, static_cast<double>(n));
            break;
        case CenterMode::calibrated: {
            for (std::size_t r = 0; r < n; ++r) {
                const std::size_t i = order[r];
                double acc = 0.0;
                for (std::size_t s = 0; s < n; ++s) {
                    if (s == r) continue;
                    const std::size_t j = order[s];
                    acc += flat_cosine(targets[i].data(), targets[j].data(), norms[i], norms[j]);
                }
                out.weights[i] = acc / static_cast<double>(n - 1);
            }
            double total = 0.0;
            for (std::size_t r = 0; r < n; ++r) total += out.weights[order[r]];
            if (total <= kMinWeightSum) {
                out.fell_back = true;
                const auto saved = out.weights;
                std::fill(out.weights.begin(), out.weights.end(), 1.0);
                weighted_sum(n, static_cast<double>(n));
                out.weights = saved;
            } else {
                weighted_sum(n, total);
            }
            break;
        }
        case CenterMode::literal: {
            // alpha_i = 1/(N'-1) sum_{j=1}^{N'-1} cos(i,j); center = 1/(N'-1) sum_{i=1}^{N'-1} alpha_i f_i.
            // "First N'-1" is taken in canonical order so the result stays order-free.
            for (std::size_t r = 0; r < n; ++r) {
                const std::size_t i = order[r];
                double acc = 0.0;
                for (std::size_t s = 0; s + 1 < n; ++s) {
                    const std::size_t j = order[s];
                    acc += flat_cosine(targets[i].data(), targets[j].data(), norms[i], norms[j]);
                }
                out.weights[i] = acc / static_cast<double>(n - 1);
            }
            weighted_sum(n - 1, static_cast<double>(n - 1));
            break;
        }
    }
    out.center = Tensor::from(shape, std::move(center));
    return out;
}

Tensor dme_forward(const Tensor& source, const CalibratedCenter& center, const EncoderParams& p) {
    const Tensor& c = center.center;
    if (c.ndim() != 2 || source.ndim() != 2 || c.cols() != source.cols() || source.rows() % c.rows() != 0) {
        throw ShapeError("dme_forward: source " + shape_str(source.shape()) + " incompatible with center " +
                         shape_str(c.shape()));
    }
    const std::size_t reps = source.rows() / c.rows();
    const Tensor query_src = reps == 1 ? c : tile_rows(c, reps);
    return encoder_block(query_src, source, source, p);
}

}  // namespace dmsd
