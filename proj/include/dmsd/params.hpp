// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "dmsd/tensor.hpp"

namespace dmsd {

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

/// Ordered, named collection of parameter tensors. Entries are handles, so a
/// store built from a model updates that model in place.
class ParamStore {
public:
    void add(std::string name, Tensor tensor);
    /// Appends every entry of `other` with `prefix` prepended to its name.
    void append(const ParamStore& other, const std::string& prefix);

    const Tensor& at(const std::string& name) const;
    Tensor& at(const std::string& name);
    bool contains(const std::string& name) const;

    std::vector<NamedTensor>& entries() { return entries_; }
    const std::vector<NamedTensor>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    std::size_t num_values() const;

    void zero_grad();
    /// Same names in the same order with the same shapes.
    bool congruent_with(const ParamStore& other) const;

private:
    std::vector<NamedTensor> entries_;
};

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias-corrected moments.
class Adam {
public:
    Adam(ParamStore params, AdamOptions opts);

    /// One update from the accumulated gradients multiplied by grad_scale
    /// (1/k averages k accumulated backward passes). Parameters without a
    /// gradient buffer are skipped.
    void step(double grad_scale = 1.0);
    std::size_t steps() const { return t_; }

private:
    ParamStore params_;
    AdamOptions opts_;
    std::vector<std::vector<double>> m_, v_;
    std::size_t t_ = 0;
};

}  // namespace dmsd
