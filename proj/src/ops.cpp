// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dmsd/errors.hpp"
#include "dmsd/kernels.hpp"
#include "tensor_impl.hpp"

namespace dmsd {

using detail::Node;
using detail::TensorImpl;

namespace {

constexpr double kProbFloor = 1e-12;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
}

void require_matrix(const Tensor& x, const char* op) {
    if (x.ndim() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_str(x.shape()));
}

void require_finite(std::span<const double> v, const char* op) {
    for (double x : v) {
        if (!std::isfinite(x)) throw NumericError(std::string(op) + ": non-finite input");
    }
}

/// 1-D vector or a single row.
bool is_row_like(const Tensor& x) { return x.ndim() == 1 || (x.ndim() == 2 && x.shape()[0] == 1); }

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.size());
    const auto da = a.data();
    const auto db = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] + db[i];
    return OpBuilder::make(a.shape(), std::move(out), {a, b}, [](const TensorImpl& o, Node& n) {
        for (std::size_t k = 0; k < 2; ++k) {
            if (double* g = n.grad_of(k)) {
                for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
            }
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.size());
    const auto da = a.data();
    const auto db = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] - db[i];
    return OpBuilder::make(a.shape(), std::move(out), {a, b}, [](const TensorImpl& o, Node& n) {
        if (double* g = n.grad_of(0)) {
            for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
        }
        if (double* g = n.grad_of(1)) {
            for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] -= o.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.size());
    const auto da = a.data();
    const auto db = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] * db[i];
    return OpBuilder::make(a.shape(), std::move(out), {a, b}, [](const TensorImpl& o, Node& n) {
        const auto& va = n.data_of(0);
        const auto& vb = n.data_of(1);
        if (double* g = n.grad_of(0)) {
            for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * vb[i];
        }
        if (double* g = n.grad_of(1)) {
            for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * va[i];
        }
    });
}

Tensor scale(const Tensor& x, double factor) {
    std::vector<double> out(x.size());
    const auto dx = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = dx[i] * factor;
    return OpBuilder::make(x.shape(), std::move(out), {x}, [factor](const TensorImpl& o, Node& n) {
        if (double* g = n.grad_of(0)) {
            for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * factor;
        }
    });
}

Tensor add_n(std::span<const Tensor> terms) {
    if (terms.empty()) throw ShapeError("add_n: no terms");
    std::vector<double> out(terms[0].size(), 0.0);
    for (const auto& t : terms) {
        require_same_shape(terms[0], t, "add_n");
        const auto d = t.data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += d[i];
    }
    return OpBuilder::make(terms[0].shape(), std::move(out), terms, [](const TensorImpl& o, Node& n) {
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
            if (double* g = n.grad_of(k)) {
                for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
            }
        }
    });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul");
    require_matrix(b, "matmul");
    if (a.shape()[1] != b.shape()[0]) {
        throw ShapeError("matmul: inner dimensions differ " + shape_str(a.shape()) + " * " + shape_str(b.shape()));
    }
    const kernels::MatmulDims d{a.shape()[0], a.shape()[1], b.shape()[1]};
    std::vector<double> out(d.p * d.r);
    kernels::matmul(a.data(), b.data(), out, d);
    return OpBuilder::make({d.p, d.r}, std::move(out), {a, b}, [d](const TensorImpl& o, Node& n) {
        if (double* g = n.grad_of(0)) {
            kernels::matmul_nt_acc(o.grad, n.data_of(1), std::span<double>(g, d.p * d.q), d);
        }
        if (double* g = n.grad_of(1)) {
            kernels::matmul_tn_acc(n.data_of(0), o.grad, std::span<double>(g, d.q * d.r), d);
        }
    });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    require_matrix(x, "linear");
    require_matrix(weight, "linear");
    const kernels::MatmulDims d{x.shape()[0], x.shape()[1], weight.shape()[1]};
    if (weight.shape()[0] != d.q) {
        throw ShapeError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                         shape_str(weight.shape()));
    }
    if (!is_row_like(bias) || bias.size() != d.r) {
        throw ShapeError("linear: bias " + shape_str(bias.shape()) + " does not match weight " +
                         shape_str(weight.shape()));
    }
    std::vector<double> out(d.p * d.r);
    kernels::matmul(x.data(), weight.data(), out, d);
    const auto db = bias.data();
    for (std::size_t i = 0; i < d.p; ++i) {
        for (std::size_t j = 0; j < d.r; ++j) out[i * d.r + j] += db[j];
    }
    return OpBuilder::make({d.p, d.r}, std::move(out), {x, weight, bias}, [d](const TensorImpl& o, Node& n) {
        if (double* g = n.grad_of(0)) {
            kernels::matmul_nt_acc(o.grad, n.data_of(1), std::span<double>(g, d.p * d.q), d);
        }
        if (double* g = n.grad_of(1)) {
            kernels::matmul_tn_acc(n.data_of(0), o.grad, std::span<double>(g, d.q * d.r), d);
        }
        if (double* g = n.grad_of(2)) {
            for (std::size_t i = 0; i < d.p; ++i) {
                for (std::size_t j = 0; j < d.r; ++j) g[j] += o.grad[i * d.r + j];
            }
        }
    });
}

Tensor relu(const Tensor& x) {
    std::vector<double> out(x.size());
    const auto dx = x.data();
    require_finite(dx, "relu");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = dx[i] > 0.0 ? dx[i] : 0.0;
    return OpBuilder::make(x.shape(), std::move(out), {x}, [](const TensorImpl& o, Node& n) {
        if (double* g = n.grad_of(0)) {
            for (std::size_t i = 0; i < o.grad.size(); ++i) {
                if (o.data[i] > 0.0) g[i] += o.grad[i];
            }
        }
    });
}

Tensor softmax(const Tensor& x) {
    if (!is_row_like(x)) throw ShapeError("softmax: expected a vector, got " + shape_str(x.shape()));
    const auto dx = x.data();
    require_finite(dx, "softmax");
    const double mx = *std::max_element(dx.begin(), dx.end());
    std::vector<double> out(dx.size());
    double total = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::exp(dx[i] - mx);
        total += out[i];
    }
    for (double& v : out) v /= total;
    return OpBuilder::make(x.shape(), std::move(out), {x}, [](const TensorImpl& o, Node& n) {
        if (double* g = n.grad_of(0)) {
            double dot = 0.0;
            for (std::size_t i = 0; i < o.grad.size(); ++i) dot += o.grad[i] * o.data[i];
            for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.data[i] * (o.grad[i] - dot);
        }
    });
}

Tensor log(const Tensor& x) {
    const auto dx = x.data();
    require_finite(dx, "log");
    std::vector<double> out(dx.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!(dx[i] > 0.0)) throw DomainError("log: non-positive input " + std::to_string(dx[i]));
        out[i] = std::log(dx[i]);
    }
    return OpBuilder::make(x.shape(), std::move(out), {x}, [](const TensorImpl& o, Node& n) {
        if (double* g = n.grad_of(0)) {
            const auto& v = n.data_of(0);
            for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] / v[i];
        }
    });
}

Tensor clamp_min(const Tensor& x, double floor) {
    const auto dx = x.data();
    std::vector<double> out(dx.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(dx[i], floor);
    return OpBuilder::make(x.shape(), std::move(out), {x}, [floor](const TensorImpl& o, Node& n) {
        if (double* g = n.grad_of(0)) {
            const auto& v = n.data_of(0);
            for (std::size_t i = 0; i < o.grad.size(); ++i) {
                if (v[i] > floor) g[i] += o.grad[i];
            }
        }
    });
}

Tensor sum(const Tensor& x) {
    require_finite(x.data(), "sum");
    double total = 0.0;
    for (double v : x.data()) total += v;
    return OpBuilder::make({1}, {total}, {x}, [](const TensorImpl& o, Node& n) {
        if (double* g = n.grad_of(0)) {
            const auto size = n.inputs[0]->data.size();
            for (std::size_t i = 0; i < size; ++i) g[i] += o.grad[0];
        }
    });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Tensor l2_norm_sq(const Tensor& x) {
    require_finite(x.data(), "l2_norm_sq");
    double total = 0.0;
    for (double v : x.data()) total += v * v;
    return OpBuilder::make({1}, {total}, {x}, [](const TensorImpl& o, Node& n) {
        if (double* g = n.grad_of(0)) {
            const auto& v = n.data_of(0);
            for (std::size_t i = 0; i < v.size(); ++i) g[i] += 2.0 * v[i] * o.grad[0];
        }
    });
}

Tensor cosine_similarity(const Tensor& a, const Tensor& b) {
    if (a.size() != b.size()) {
        throw ShapeError("cosine_similarity: size mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    const auto da = a.data();
    const auto db = b.data();
    double dot = 0.0, na2 = 0.0, nb2 = 0.0;
    for (std::size_t i = 0; i < da.size(); ++i) {
        dot += da[i] * db[i];
        na2 += da[i] * da[i];
        nb2 += db[i] * db[i];
    }
    if (!(na2 > 0.0) || !(nb2 > 0.0)) throw DegenerateInputError("cosine_similarity: zero-norm input");
    const double na = std::sqrt(na2);
    const double nb = std::sqrt(nb2);
    const double c = std::clamp(dot / (na * nb), -1.0, 1.0);
    return OpBuilder::make({1}, {c}, {a, b}, [na, nb, c](const TensorImpl& o, Node& n) {
        const auto& va = n.data_of(0);
        const auto& vb = n.data_of(1);
        const double g0 = o.grad[0];
        if (double* g = n.grad_of(0)) {
            for (std::size_t i = 0; i < va.size(); ++i) g[i] += g0 * (vb[i] / (na * nb) - c * va[i] / (na * na));
        }
        if (double* g = n.grad_of(1)) {
            for (std::size_t i = 0; i < vb.size(); ++i) g[i] += g0 * (va[i] / (na * nb) - c * vb[i] / (nb * nb));
        }
    });
}

Tensor mean_rows(const Tensor& x) {
    require_matrix(x, "mean_rows");
    const std::size_t rows = x.shape()[0];
    const std::size_t cols = x.shape()[1];
    const auto dx = x.data();
    std::vector<double> out(cols, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) out[j] += dx[i * cols + j];
    }
    const double inv = 1.0 / static_cast<double>(rows);
    for (double& v : out) v *= inv;
    return OpBuilder::make({1, cols}, std::move(out), {x}, [rows, cols, inv](const TensorImpl& o, Node& n) {
        if (double* g = n.grad_of(0)) {
            for (std::size_t i = 0; i < rows; ++i) {
                for (std::size_t j = 0; j < cols; ++j) g[i * cols + j] += o.grad[j] * inv;
            }
        }
    });
}

Tensor stack(std::span<const Tensor> scalars) {
    if (scalars.empty()) throw ShapeError("stack: no inputs");
    std::vector<double> out;
    out.reserve(scalars.size());
    for (const auto& s : scalars) out.push_back(s.item());
    return OpBuilder::make({scalars.size()}, std::move(out), scalars, [](const TensorImpl& o, Node& n) {
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
            if (double* g = n.grad_of(k)) g[0] += o.grad[k];
        }
    });
}

Tensor pick(const Tensor& x, std::size_t index) {
    if (index >= x.size()) {
        throw ShapeError("pick: index " + std::to_string(index) + " out of range for " + shape_str(x.shape()));
    }
    return OpBuilder::make({1}, {x.data()[index]}, {x}, [index](const TensorImpl& o, Node& n) {
        if (double* g = n.grad_of(0)) g[index] += o.grad[0];
    });
}

Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count) {
    require_matrix(x, "slice_rows");
    const std::size_t cols = x.shape()[1];
    if (count == 0 || start + count > x.shape()[0]) {
        throw ShapeError("slice_rows: rows [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") out of range for " + shape_str(x.shape()));
    }
    const auto dx = x.data();
    std::vector<double> out(dx.begin() + static_cast<std::ptrdiff_t>(start * cols),
                            dx.begin() + static_cast<std::ptrdiff_t>((start + count) * cols));
    return OpBuilder::make({count, cols}, std::move(out), {x}, [start, cols](const TensorImpl& o, Node& n) {
        if (double* g = n.grad_of(0)) {
            double* dst = g + start * cols;
            for (std::size_t i = 0; i < o.grad.size(); ++i) dst[i] += o.grad[i];
        }
    });
}

Tensor concat_rows(std::span<const Tensor> parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    const std::size_t cols = parts[0].cols();
    std::size_t rows = 0;
    for (const auto& p : parts) {
        require_matrix(p, "concat_rows");
        if (p.cols() != cols) throw ShapeError("concat_rows: column mismatch " + shape_str(p.shape()));
        rows += p.rows();
    }
    std::vector<double> out;
    out.reserve(rows * cols);
    for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    return OpBuilder::make({rows, cols}, std::move(out), parts, [](const TensorImpl& o, Node& n) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
            const std::size_t len = n.inputs[k]->data.size();
            if (double* g = n.grad_of(k)) {
                for (std::size_t i = 0; i < len; ++i) g[i] += o.grad[offset + i];
            }
            offset += len;
        }
    });
}

Tensor tile_rows(const Tensor& x, std::size_t times) {
    require_matrix(x, "tile_rows");
    if (times == 0) throw ShapeError("tile_rows: times must be positive");
    const auto dx = x.data();
    std::vector<double> out;
    out.reserve(dx.size() * times);
    for (std::size_t t = 0; t < times; ++t) out.insert(out.end(), dx.begin(), dx.end());
    return OpBuilder::make({x.shape()[0] * times, x.shape()[1]}, std::move(out), {x},
                           [times](const TensorImpl& o, Node& n) {
                               if (double* g = n.grad_of(0)) {
                                   const std::size_t len = n.inputs[0]->data.size();
                                   for (std::size_t t = 0; t < times; ++t) {
                                       for (std::size_t i = 0; i < len; ++i) g[i] += o.grad[t * len + i];
                                   }
                               }
                           });
}

Tensor frame_cosine_distance(const Tensor& a, const Tensor& b) {
    require_matrix(a, "frame_cosine_distance");
    require_matrix(b, "frame_cosine_distance");
    const std::size_t la = a.shape()[0];
    const std::size_t lb = b.shape()[0];
    const std::size_t dim = a.shape()[1];
    if (b.shape()[1] != dim) {
        throw ShapeError("frame_cosine_distance: feature sizes differ " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    const auto da = a.data();
    const auto db = b.data();
    auto row_norms = [dim](std::span<const double> v, std::size_t rows) {
        std::vector<double> norms(rows);
        for (std::size_t i = 0; i < rows; ++i) {
            double s = 0.0;
            for (std::size_t k = 0; k < dim; ++k) s += v[i * dim + k] * v[i * dim + k];
            if (!(s > 0.0)) throw DegenerateInputError("frame_cosine_distance: zero-norm frame");
            norms[i] = std::sqrt(s);
        }
        return norms;
    };
    auto na = row_norms(da, la);
    auto nb = row_norms(db, lb);
    std::vector<double> cosines(la * lb);
    std::vector<double> out(la * lb);
    for (std::size_t i = 0; i < la; ++i) {
        for (std::size_t j = 0; j < lb; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < dim; ++k) dot += da[i * dim + k] * db[j * dim + k];
            cosines[i * lb + j] = dot / (na[i] * nb[j]);
            out[i * lb + j] = 1.0 - cosines[i * lb + j];
        }
    }
    return OpBuilder::make(
        {la, lb}, std::move(out), {a, b},
        [la, lb, dim, na = std::move(na), nb = std::move(nb), cosines = std::move(cosines)](const TensorImpl& o,
                                                                                          Node& n) {
            const auto& va = n.data_of(0);
            const auto& vb = n.data_of(1);
            double* ga = n.grad_of(0);
            double* gb = n.grad_of(1);
            for (std::size_t i = 0; i < la; ++i) {
                for (std::size_t j = 0; j < lb; ++j) {
                    const double g = -o.grad[i * lb + j];
                    if (g == 0.0) continue;
                    const double c = cosines[i * lb + j];
                    const double inv = 1.0 / (na[i] * nb[j]);
                    if (ga) {
                        const double self = c / (na[i] * na[i]);
                        for (std::size_t k = 0; k < dim; ++k) {
                            ga[i * dim + k] += g * (vb[j * dim + k] * inv - self * va[i * dim + k]);
                        }
                    }
                    if (gb) {
                        const double self = c / (nb[j] * nb[j]);
                        for (std::size_t k = 0; k < dim; ++k) {
                            gb[j * dim + k] += g * (va[i * dim + k] * inv - self * vb[j * dim + k]);
                        }
                    }
                }
            }
        });
}

Tensor alignment_cost(const Tensor& cost, double gamma, bool open_ends) {
    require_matrix(cost, "alignment_cost");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
        throw DomainError("alignment_cost: gamma must be finite and >= 0, got " + std::to_string(gamma));
    }
    require_finite(cost.data(), "alignment_cost");
    const std::size_t rows = cost.shape()[0];
    const std::size_t inner = cost.shape()[1];
    const std::size_t pad = open_ends ? 1 : 0;
    const std::size_t cols = inner + 2 * pad;
    const auto src = cost.data();
    auto c_at = [&](std::size_t i, std::size_t j) {
        if (j < pad || j >= pad + inner) return 0.0;
        return src[i * inner + (j - pad)];
    };

    // Predecessor order: diagonal, up, left. Weights are the soft-min
    // responsibilities (or a one-hot argmin when gamma == 0).
    constexpr std::size_t kPreds = 3;
    std::vector<double> acc(rows * cols);
    std::vector<double> weights(rows * cols * kPreds, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            const std::size_t cell = i * cols + j;
            if (i == 0 && j == 0) {
                acc[cell] = c_at(0, 0);
                continue;
            }
            double vals[kPreds] = {0.0, 0.0, 0.0};
            bool has[kPreds] = {i > 0 && j > 0, i > 0, j > 0};
            if (has[0]) vals[0] = acc[(i - 1) * cols + (j - 1)];
            if (has[1]) vals[1] = acc[(i - 1) * cols + j];
            if (has[2]) vals[2] = acc[i * cols + (j - 1)];
            double best = std::numeric_limits<double>::infinity();
            std::size_t arg = 0;
            for (std::size_t k = 0; k < kPreds; ++k) {
                if (has[k] && vals[k] < best) {
                    best = vals[k];
                    arg = k;
                }
            }
            double combined = best;
            double* w = &weights[cell * kPreds];
            if (gamma == 0.0) {
                w[arg] = 1.0;
            } else {
                double total = 0.0;
                for (std::size_t k = 0; k < kPreds; ++k) {
                    if (has[k]) {
                        w[k] = std::exp(-(vals[k] - best) / gamma);
                        total += w[k];
                    }
                }
                for (std::size_t k = 0; k < kPreds; ++k) w[k] /= total;
                combined = best - gamma * std::log(total);
            }
            acc[cell] = c_at(i, j) + combined;
        }
    }
    const double result = acc[rows * cols - 1];
    return OpBuilder::make(
        {1}, {result}, {cost},
        [rows, cols, inner, pad, weights = std::move(weights)](const TensorImpl& o, Node& n) {
            double* g = n.grad_of(0);
            if (!g) return;
            std::vector<double> adj(rows * cols, 0.0);
            adj[rows * cols - 1] = o.grad[0];
            for (std::size_t cell = rows * cols; cell-- > 0;) {
                const double e = adj[cell];
                if (e == 0.0) continue;
                const std::size_t i = cell / cols;
                const std::size_t j = cell % cols;
                if (j >= pad && j < pad + inner) g[i * inner + (j - pad)] += e;
                const double* w = &weights[cell * kPreds];
                if (w[0] != 0.0) adj[(i - 1) * cols + (j - 1)] += e * w[0];
                if (w[1] != 0.0) adj[(i - 1) * cols + j] += e * w[1];
                if (w[2] != 0.0) adj[i * cols + (j - 1)] += e * w[2];
            }
        });
}

Tensor kl_divergence(const Tensor& q, const Tensor& p) {
    if (q.size() != p.size()) {
        throw ShapeError("kl_divergence: length mismatch " + shape_str(q.shape()) + " vs " + shape_str(p.shape()));
    }
    std::vector<double> qv = q.to_vector();
    const auto pv = p.data();
    double total = 0.0;
    for (std::size_t j = 0; j < qv.size(); ++j) {
        if (qv[j] > 0.0) total += qv[j] * (std::log(qv[j]) - std::log(std::max(pv[j], kProbFloor)));
    }
    const Tensor pin = p;
    return OpBuilder::make({1}, {total}, {pin}, [qv = std::move(qv)](const TensorImpl& o, Node& n) {
        if (double* g = n.grad_of(0)) {
            const auto& v = n.data_of(0);
            for (std::size_t j = 0; j < qv.size(); ++j) {
                if (qv[j] > 0.0 && v[j] > kProbFloor) g[j] -= o.grad[0] * qv[j] / v[j];
            }
        }
    });
}

double grad_check(const std::function<Tensor()>& f, std::span<Tensor> inputs, double step) {
    if (!(step > 0.0)) throw DomainError("grad_check: step must be positive");
    for (auto& x : inputs) x.zero_grad();
    const Tensor loss = f();
    if (!std::isfinite(loss.item())) throw NumericError("grad_check: non-finite loss");
    backward(loss);

    double worst = 0.0;
    for (auto& x : inputs) {
        const std::vector<double> analytic =
            x.has_grad() ? std::vector<double>(x.grad().begin(), x.grad().end()) : std::vector<double>(x.size(), 0.0);
        auto values = x.mutable_data();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + step;
            const double up = f().item();
            values[i] = saved - step;
            const double down = f().item();
            values[i] = saved;
            if (!std::isfinite(up) || !std::isfinite(down)) throw NumericError("grad_check: non-finite probe");
            const double numeric = (up - down) / (2.0 * step);
            const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
            worst = std::max(worst, err);
        }
        x.zero_grad();
    }
    return worst;
}

double grad_check(const std::function<Tensor()>& f, Tensor& x, double step) {
    return grad_check(f, std::span<Tensor>(&x, 1), step);
}

}  // namespace dmsd
