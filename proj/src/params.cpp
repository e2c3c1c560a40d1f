// SPDX-License-Identifier: Apache-2.0
#include "dmsd/params.hpp"

#include <cmath>

#include "dmsd/errors.hpp"

namespace dmsd {

void ParamStore::add(std::string name, Tensor tensor) {
    if (contains(name)) throw StructuralError("duplicate parameter " + name);
    entries_.push_back({std::move(name), std::move(tensor)});
}

void ParamStore::append(const ParamStore& other, const std::string& prefix) {
    for (const auto& e : other.entries_) add(prefix + e.name, e.tensor);
}

const Tensor& ParamStore::at(const std::string& name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return e.tensor;
    }
    throw StructuralError("no parameter named " + name);
}

Tensor& ParamStore::at(const std::string& name) {
    return const_cast<Tensor&>(static_cast<const ParamStore&>(*this).at(name));
}

bool ParamStore::contains(const std::string& name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return true;
    }
    return false;
}

std::size_t ParamStore::num_values() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.tensor.size();
    return n;
}

void ParamStore::zero_grad() {
    for (auto& e : entries_) e.tensor.zero_grad();
}

bool ParamStore::congruent_with(const ParamStore& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].name != other.entries_[i].name) return false;
        if (entries_[i].tensor.shape() != other.entries_[i].tensor.shape()) return false;
    }
    return true;
}

Adam::Adam(ParamStore params, AdamOptions opts) : params_(std::move(params)), opts_(opts) {
    for (const auto& e : params_.entries()) {
        m_.emplace_back(e.tensor.size(), 0.0);
        v_.emplace_back(e.tensor.size(), 0.0);
    }
}

void Adam::step(double grad_scale) {
    ++t_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    auto& entries = params_.entries();
    for (std::size_t k = 0; k < entries.size(); ++k) {
        Tensor& p = entries[k].tensor;
        if (!p.has_grad()) continue;
        const auto g = p.grad();
        auto w = p.mutable_data();
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = g[i] * grad_scale;
            m[i] = opts_.beta1 * m[i] + (1.0 - opts_.beta1) * gi;
            v[i] = opts_.beta2 * v[i] + (1.0 - opts_.beta2) * gi * gi;
            w[i] -= opts_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + opts_.eps);
        }
    }
}

}  // namespace dmsd
