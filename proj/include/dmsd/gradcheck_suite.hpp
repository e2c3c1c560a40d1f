// SPDX-License-Identifier: Apache-2.0
// Finite-difference sweep over every differentiable op and the full training losses.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dmsd {

struct GradCheckResult {
    std::string name;
    double error = 0;
    double tolerance = 0;
    bool pass() const { return error < tolerance; }
};

inline constexpr double kPrimitiveTolerance = 1e-6;
inline constexpr double kCompositeTolerance = 1e-4;
inline constexpr double kGradCheckStep = 1e-5;

/// Tiny scale: N=2, K=1, P=2, N'=2, M=3, D=4.
std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed = 7);

}  // namespace dmsd
