// SPDX-License-Identifier: Apache-2.0
//
// Minimal dense tensor with reverse-mode automatic differentiation.
//
// The graph is recorded as operations execute: every op whose inputs include a
// tensor with requires_grad gets a node holding its inputs and a local adjoint
// rule. backward() orders the nodes reachable from a scalar loss into a tape
// (inputs before consumers), replays it in reverse, and then retires the tape.
// A retired tape cannot be replayed; calling backward again on the same graph
// throws UsageError instead of double-accumulating.
//
// All values are 64-bit. Shapes are not broadcast, with the single exception
// of the bias row in linear().
#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dmsd {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct TensorImpl;
struct Node;
}  // namespace detail

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor vector(std::vector<double> values, bool requires_grad = false);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                         bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    std::size_t size() const;
    std::size_t ndim() const { return shape().size(); }
    /// Leading dimension of a 2-D tensor (1 for a 1-D tensor).
    std::size_t rows() const;
    /// Trailing dimension.
    std::size_t cols() const;

    std::span<const double> data() const;
    /// Direct write access, used by optimizers and finite-difference probes.
    std::span<double> mutable_data();
    double item() const;
    double at(std::size_t i) const { return data()[i]; }
    std::vector<double> to_vector() const;

    bool requires_grad() const;
    /// Only valid on leaf tensors (tensors not produced by a recorded op).
    void set_requires_grad(bool flag);
    bool is_leaf() const;

    bool has_grad() const;
    /// Accumulated gradient; empty span when none has been accumulated.
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    void zero_grad();

    /// Copy of the values with no graph history and requires_grad = false.
    Tensor detach() const;
    /// Same as detach() but keeps requires_grad (used to clone parameters).
    Tensor clone_leaf() const;

    /// Identity of the underlying storage.
    const void* id() const { return impl_.get(); }

private:
    explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<detail::TensorImpl> impl_;

    friend struct detail::Node;
    friend class OpBuilder;
    friend void backward(const Tensor& loss);
};

/// Runs the reverse pass from a scalar loss.
///
/// Every requires_grad leaf reachable from `loss` gets its gradient summed
/// into grad(). Throws UsageError for a non-scalar root, a root that is not
/// the output of a recorded op, or a graph whose tape was already replayed.
void backward(const Tensor& loss);

// ---------------------------------------------------------------------------
// Differentiable operations.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
/// Sum of a list of same-shape tensors.
Tensor add_n(std::span<const Tensor> terms);

/// [p x q] * [q x r] -> [p x r].
Tensor matmul(const Tensor& a, const Tensor& b);
/// x [n x q] * weight [q x r] + bias [r], bias added to each row.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor relu(const Tensor& x);
/// Stable softmax of a 1-D or single-row tensor; output has the input's shape.
Tensor softmax(const Tensor& x);
/// Element-wise natural log; every entry must be > 0.
Tensor log(const Tensor& x);
/// max(x, floor) element-wise; gradient passes only where x > floor.
Tensor clamp_min(const Tensor& x, double floor);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor l2_norm_sq(const Tensor& x);
/// Cosine of the angle between two same-size tensors, treated as flat vectors.
Tensor cosine_similarity(const Tensor& a, const Tensor& b);

/// Column means of an [M x D] matrix as a [1 x D] row.
Tensor mean_rows(const Tensor& x);
/// Scalars -> 1-D vector.
Tensor stack(std::span<const Tensor> scalars);
/// Element i of any tensor as a scalar.
Tensor pick(const Tensor& x, std::size_t index);
Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count);
Tensor concat_rows(std::span<const Tensor> parts);
/// Repeats the rows of x `times` times, stacked vertically.
Tensor tile_rows(const Tensor& x, std::size_t times);

/// C[l][m] = 1 - cos(a_l, b_m) for rows of a [L x D] and b [M x D].
Tensor frame_cosine_distance(const Tensor& a, const Tensor& b);

/// Monotone alignment cost over a cost matrix [L x M].
///
/// Dynamic programming from (0,0) to (L-1,M-1) with right, down and diagonal
/// moves. gamma == 0 combines predecessors with a hard min; gamma > 0 uses the
/// smooth minimum -gamma * log(sum(exp(-x / gamma))). When open_ends is set,
/// a zero-cost column is added on both sides so the path may enter and leave
/// the matrix at any row.
Tensor alignment_cost(const Tensor& cost, double gamma, bool open_ends = false);

/// sum_j q_j * (log q_j - log p_j). `q` is treated as a constant and never
/// receives gradient; p entries are floored at 1e-12 before the log.
Tensor kl_divergence(const Tensor& q, const Tensor& p);

// ---------------------------------------------------------------------------
// Finite-difference verification.

/// Max over coordinates of |analytic - numeric| / max(1, |numeric|), where
/// numeric is the central difference of f with the given step, taken over
/// every coordinate of every tensor in `inputs`. f must return a scalar built
/// from the inputs. Gradients of the inputs are reset before and after.
double grad_check(const std::function<Tensor()>& f, std::span<Tensor> inputs, double step = 1e-5);
double grad_check(const std::function<Tensor()>& f, Tensor& x, double step = 1e-5);

}  // namespace dmsd
