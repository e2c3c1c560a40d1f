// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "dmsd/errors.hpp"
#include "tensor_impl.hpp"

namespace dmsd {

using detail::Node;
using detail::TensorImpl;

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
}

namespace {

void validate_shape(const Shape& shape, std::size_t n) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
    for (auto d : shape) {
        if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
    }
    if (shape_size(shape) != n) {
        throw ShapeError("shape " + shape_str(shape) + " does not match " + std::to_string(n) + " values");
    }
}

const TensorImpl& checked(const std::shared_ptr<TensorImpl>& impl) {
    if (!impl) throw UsageError("use of an undefined tensor");
    return *impl;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    const auto n = shape_size(shape);
    return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    validate_shape(shape, values.size());
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(values);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
    const auto n = values.size();
    return from({n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values, bool requires_grad) {
    return from({rows, cols}, std::move(values), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return checked(impl_).shape; }
std::size_t Tensor::size() const { return checked(impl_).data.size(); }

std::size_t Tensor::rows() const {
    const auto& s = shape();
    return s.size() == 1 ? 1 : s[0];
}

std::size_t Tensor::cols() const { return shape().back(); }

std::span<const double> Tensor::data() const { return checked(impl_).data; }
std::span<double> Tensor::mutable_data() {
    checked(impl_);
    return impl_->data;
}

double Tensor::item() const {
    const auto& impl = checked(impl_);
    if (impl.data.size() != 1) throw ShapeError("item() on a tensor of shape " + shape_str(impl.shape));
    return impl.data[0];
}

std::vector<double> Tensor::to_vector() const { return checked(impl_).data; }

bool Tensor::requires_grad() const { return checked(impl_).requires_grad; }

void Tensor::set_requires_grad(bool flag) {
    checked(impl_);
    if (impl_->node) throw UsageError("requires_grad can only be changed on leaf tensors");
    impl_->requires_grad = flag;
    if (!flag) impl_->grad.clear();
}

bool Tensor::is_leaf() const { return checked(impl_).node == nullptr; }
bool Tensor::has_grad() const { return !checked(impl_).grad.empty(); }
std::span<const double> Tensor::grad() const { return checked(impl_).grad; }

std::span<double> Tensor::mutable_grad() {
    checked(impl_);
    if (!impl_->requires_grad) throw UsageError("tensor does not require grad");
    return impl_->ensure_grad();
}

void Tensor::zero_grad() {
    checked(impl_);
    impl_->grad.clear();
}

Tensor Tensor::detach() const {
    const auto& impl = checked(impl_);
    return from(impl.shape, impl.data, false);
}

Tensor Tensor::clone_leaf() const {
    const auto& impl = checked(impl_);
    return from(impl.shape, impl.data, impl.requires_grad);
}

Tensor OpBuilder::make(Shape shape, std::vector<double> data, std::span<const Tensor> inputs,
                       detail::BackwardFn backward) {
    auto out = std::make_shared<TensorImpl>();
    out->shape = std::move(shape);
    out->data = std::move(data);
    bool needs_grad = false;
    for (const auto& t : inputs) needs_grad = needs_grad || checked(t.impl_).requires_grad;
    if (needs_grad) {
        auto node = std::make_shared<Node>();
        node->inputs.reserve(inputs.size());
        for (const auto& t : inputs) node->inputs.push_back(t.impl_);
        node->backward = std::move(backward);
        out->requires_grad = true;
        out->node = std::move(node);
    }
    return Tensor(std::move(out));
}

void backward(const Tensor& loss) {
    const auto& root = loss.impl_;
    if (!root) throw UsageError("backward on an undefined tensor");
    if (root->data.size() != 1) {
        throw UsageError("backward requires a scalar loss, got shape " + shape_str(root->shape));
    }
    if (!root->node) throw UsageError("backward root is not the output of a recorded operation");

    // Tape: every reachable op output, each after all of its inputs.
    std::vector<TensorImpl*> tape;
    std::unordered_set<const TensorImpl*> seen;
    std::vector<std::pair<TensorImpl*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [impl, next] = stack.back();
        Node* node = impl->node.get();
        if (node->consumed) throw UsageError("stale tape: backward already ran on this graph");
        if (next < node->inputs.size()) {
            TensorImpl* child = node->inputs[next++].get();
            if (child->node && seen.insert(child).second) stack.emplace_back(child, 0);
        } else {
            tape.push_back(impl);
            stack.pop_back();
        }
    }

    root->ensure_grad()[0] += 1.0;
    for (auto it = tape.rbegin(); it != tape.rend(); ++it) {
        TensorImpl* impl = *it;
        if (!impl->grad.empty()) impl->node->backward(*impl, *impl->node);
    }

    for (TensorImpl* impl : tape) {
        impl->node->consumed = true;
        impl->node->backward = nullptr;
        impl->node->inputs.clear();
        impl->grad.clear();
        impl->grad.shrink_to_fit();
    }
}

}  // namespace dmsd
