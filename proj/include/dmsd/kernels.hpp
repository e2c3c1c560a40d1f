// SPDX-License-Identifier: Apache-2.0
//
// Dense matrix kernels behind the tensor engine. Every kernel exists in a
// serial reference form and an OpenMP form that splits output rows across
// threads. Both forms visit each output element with the same inner-loop
// order, so their results are bit-identical; tests hold them to that.
#pragma once

#include <cstddef>
#include <span>

namespace dmsd::kernels {

/// Row-major shapes: a is [p x q], b is [q x r], out is [p x r].
struct MatmulDims {
    std::size_t p = 0;
    std::size_t q = 0;
    std::size_t r = 0;
};

namespace serial {
/// out = a * b (overwrites out).
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> out, MatmulDims d);
/// out[q x r] += a^T * g, with a [p x q] and g [p x r]. Weight adjoint of matmul.
void matmul_tn_acc(std::span<const double> a, std::span<const double> g, std::span<double> out, MatmulDims d);
/// out[p x q] += g * b^T, with g [p x r] and b [q x r]. Input adjoint of matmul.
void matmul_nt_acc(std::span<const double> g, std::span<const double> b, std::span<double> out, MatmulDims d);
}  // namespace serial

namespace omp {
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> out, MatmulDims d);
void matmul_tn_acc(std::span<const double> a, std::span<const double> g, std::span<double> out, MatmulDims d);
void matmul_nt_acc(std::span<const double> g, std::span<const double> b, std::span<double> out, MatmulDims d);
}  // namespace omp

/// True when the library was built with OpenMP.
bool openmp_enabled();

/// Work size (p*q*r multiply-adds) at or above which the dispatchers below
/// switch to the OpenMP kernels.
std::size_t parallel_threshold();
void set_parallel_threshold(std::size_t flops);

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> out, MatmulDims d);
void matmul_tn_acc(std::span<const double> a, std::span<const double> g, std::span<double> out, MatmulDims d);
void matmul_nt_acc(std::span<const double> g, std::span<const double> b, std::span<double> out, MatmulDims d);

}  // namespace dmsd::kernels
