// SPDX-License-Identifier: Apache-2.0
#include "dmsd/kernels.hpp"

#include <algorithm>
#include <atomic>

namespace dmsd::kernels {

namespace serial {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> out, MatmulDims d) {
    for (std::size_t i = 0; i < d.p; ++i) {
        double* row = out.data() + i * d.r;
        std::fill(row, row + d.r, 0.0);
        for (std::size_t k = 0; k < d.q; ++k) {
            const double aik = a[i * d.q + k];
            const double* brow = b.data() + k * d.r;
            for (std::size_t j = 0; j < d.r; ++j) row[j] += aik * brow[j];
        }
    }
}

void matmul_tn_acc(std::span<const double> a, std::span<const double> g, std::span<double> out, MatmulDims d) {
    for (std::size_t i = 0; i < d.q; ++i) {
        double* row = out.data() + i * d.r;
        for (std::size_t k = 0; k < d.p; ++k) {
            const double aki = a[k * d.q + i];
            const double* grow = g.data() + k * d.r;
            for (std::size_t j = 0; j < d.r; ++j) row[j] += aki * grow[j];
        }
    }
}

void matmul_nt_acc(std::span<const double> g, std::span<const double> b, std::span<double> out, MatmulDims d) {
    for (std::size_t i = 0; i < d.p; ++i) {
        const double* grow = g.data() + i * d.r;
        for (std::size_t k = 0; k < d.q; ++k) {
            const double* brow = b.data() + k * d.r;
            double acc = 0.0;
            for (std::size_t j = 0; j < d.r; ++j) acc += grow[j] * brow[j];
            out[i * d.q + k] += acc;
        }
    }
}

}  // namespace serial

namespace {
std::atomic<std::size_t> g_threshold{std::size_t{1} << 16};

bool use_parallel(MatmulDims d) {
    return openmp_enabled() && d.p * d.q * d.r >= g_threshold.load(std::memory_order_relaxed);
}
}  // namespace

std::size_t parallel_threshold() { return g_threshold.load(); }
void set_parallel_threshold(std::size_t flops) { g_threshold.store(flops); }

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> out, MatmulDims d) {
    if (use_parallel(d)) {
        omp::matmul(a, b, out, d);
    } else {
        serial::matmul(a, b, out, d);
    }
}

void matmul_tn_acc(std::span<const double> a, std::span<const double> g, std::span<double> out, MatmulDims d) {
    if (use_parallel(d)) {
        omp::matmul_tn_acc(a, g, out, d);
    } else {
        serial::matmul_tn_acc(a, g, out, d);
    }
}

void matmul_nt_acc(std::span<const double> g, std::span<const double> b, std::span<double> out, MatmulDims d) {
    if (use_parallel(d)) {
        omp::matmul_nt_acc(g, b, out, d);
    } else {
        serial::matmul_nt_acc(g, b, out, d);
    }
}

}  // namespace dmsd::kernels
