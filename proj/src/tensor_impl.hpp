// SPDX-License-Identifier: Apache-2.0
// Internal representation shared by the tensor core and the op library.
#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "dmsd/tensor.hpp"

namespace dmsd {
namespace detail {

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
    std::shared_ptr<Node> node;

    std::vector<double>& ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), 0.0);
        return grad;
    }
};

/// Adjoint rule: reads out.grad, adds into the grads of node.inputs.
using BackwardFn = std::function<void(const TensorImpl& out, Node& node)>;

struct Node {
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    BackwardFn backward;
    bool consumed = false;

    /// Gradient buffer of input i, or nullptr when that input takes no gradient.
    double* grad_of(std::size_t i) {
        auto& in = *inputs[i];
        return in.requires_grad ? in.ensure_grad().data() : nullptr;
    }
    const std::vector<double>& data_of(std::size_t i) const { return inputs[i]->data; }
};

}  // namespace detail

class OpBuilder {
public:
    static const std::shared_ptr<detail::TensorImpl>& impl(const Tensor& t) { return t.impl_; }
    static Tensor wrap(std::shared_ptr<detail::TensorImpl> impl) { return Tensor(std::move(impl)); }

    /// Creates an op output and records a node when any input needs gradient.
    static Tensor make(Shape shape, std::vector<double> data, std::span<const Tensor> inputs,
                       detail::BackwardFn backward);
    static Tensor make(Shape shape, std::vector<double> data, std::initializer_list<Tensor> inputs,
                       detail::BackwardFn backward) {
        const std::vector<Tensor> v(inputs);
        return make(std::move(shape), std::move(data), std::span<const Tensor>(v), std::move(backward));
    }
};

}  // namespace dmsd
