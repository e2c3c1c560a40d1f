// SPDX-License-Identifier: Apache-2.0
#include "dmsd/kernels.hpp"

#include <algorithm>
#include <cstdint>

namespace dmsd::kernels {

bool openmp_enabled() {
#ifdef _OPENMP
    return true;
#else
    return false;
#endif
}

namespace omp {

// Loops are split over output rows only; the per-element accumulation order
// matches the serial kernels exactly.

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> out, MatmulDims d) {
    const auto rows = static_cast<std::int64_t>(d.p);
#pragma omp parallel for schedule(static)
    for (std::int64_t ii = 0; ii < rows; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
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
    const auto rows = static_cast<std::int64_t>(d.q);
#pragma omp parallel for schedule(static)
    for (std::int64_t ii = 0; ii < rows; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        double* row = out.data() + i * d.r;
        for (std::size_t k = 0; k < d.p; ++k) {
            const double aki = a[k * d.q + i];
            const double* grow = g.data() + k * d.r;
            for (std::size_t j = 0; j < d.r; ++j) row[j] += aki * grow[j];
        }
    }
}

void matmul_nt_acc(std::span<const double> g, std::span<const double> b, std::span<double> out, MatmulDims d) {
    const auto rows = static_cast<std::int64_t>(d.p);
#pragma omp parallel for schedule(static)
    for (std::int64_t ii = 0; ii < rows; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const double* grow = g.data() + i * d.r;
        for (std::size_t k = 0; k < d.q; ++k) {
            const double* brow = b.data() + k * d.r;
            double acc = 0.0;
            for (std::size_t j = 0; j < d.r; ++j) acc += grow[j] * brow[j];
            out[i * d.q + k] += acc;
        }
    }
}

}  // namespace omp
}  // namespace dmsd::kernels
