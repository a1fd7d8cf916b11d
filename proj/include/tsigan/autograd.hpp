#pragma once

// Reverse-mode differentiation over Tensor values.
//
// Every operation records its inputs and a backward rule. Backward rules are
// themselves written in terms of differentiable operations, so gradients can be
// differentiated again (needed for the critics' gradient penalty).

#include "tsigan/tensor.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace tsigan::ag {

template <typename T>
struct Node;
template <typename T>
class Var;

/// Backward rule: given the op inputs and the upstream gradient, return one
/// gradient per input. Entries whose `needed` flag is false may be left undefined.
template <typename T>
using BackwardFn = std::function<std::vector<Var<T>>(const std::vector<Var<T>>& inputs,
                                                     const Var<T>& grad,
                                                     const std::vector<bool>& needed)>;

bool grad_enabled() noexcept;

template <typename T>
Var<T> make_op(const char* op, Tensor<T> value, std::vector<Var<T>> inputs, BackwardFn<T> backward);

template <typename T>
class Var {
public:
    Var() = default;

    /// Leaf variable. Parameters are leaves with requires_grad = true.
    explicit Var(Tensor<T> value, bool requires_grad = false);

    bool defined() const noexcept { return static_cast<bool>(node_); }
    const Tensor<T>& value() const;
    /// In-place access for optimizers; only valid on leaves.
    Tensor<T>& mutable_value();
    const Shape& shape() const { return value().shape(); }
    std::size_t size() const { return value().size(); }
    bool requires_grad() const noexcept;
    bool is_leaf() const noexcept;
    const char* op_name() const noexcept;

    /// Same value, cut from the graph.
    Var detach() const { return Var(value(), false); }
    /// Single-element value.
    T item() const;

    Node<T>* node() const noexcept { return node_.get(); }

private:
    friend Var make_op<T>(const char*, Tensor<T>, std::vector<Var>, BackwardFn<T>);

    std::shared_ptr<Node<T>> node_;
};

template <typename T>
struct Node {
    Tensor<T> value;
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<Var<T>> inputs;
    BackwardFn<T> backward;
};

template <typename T>
Var<T>::Var(Tensor<T> value, bool requires_grad) : node_(std::make_shared<Node<T>>())
{
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
}

template <typename T>
const Tensor<T>& Var<T>::value() const
{
    if (!node_) {
        throw GraphError("access to an undefined variable");
    }
    return node_->value;
}

template <typename T>
Tensor<T>& Var<T>::mutable_value()
{
    if (!node_ || node_->backward) {
        throw GraphError("only leaf variables may be modified in place");
    }
    return node_->value;
}

template <typename T>
bool Var<T>::requires_grad() const noexcept
{
    return node_ && node_->requires_grad;
}

template <typename T>
bool Var<T>::is_leaf() const noexcept
{
    return node_ && !node_->backward;
}

template <typename T>
const char* Var<T>::op_name() const noexcept
{
    return node_ ? node_->op : "undefined";
}

template <typename T>
T Var<T>::item() const
{
    if (value().size() != 1) {
        throw GraphError("item() on a tensor of shape " + shape_string(shape()));
    }
    return value()[0];
}

/// Records an operation if gradient recording is on and any input requires a gradient;
/// otherwise returns a constant.
template <typename T>
Var<T> make_op(const char* op, Tensor<T> value, std::vector<Var<T>> inputs, BackwardFn<T> backward)
{
    Var<T> out(std::move(value), false);
    bool any = false;
    for (const auto& in : inputs) {
        any = any || in.requires_grad();
    }
    if (any && grad_enabled()) {
        out.node_->requires_grad = true;
        out.node_->op = op;
        out.node_->inputs = std::move(inputs);
        out.node_->backward = std::move(backward);
    }
    return out;
}

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

/// Gradients of a single-element output with respect to each of `inputs`.
/// Inputs the output does not depend on receive zeros. With create_graph the
/// returned gradients are themselves differentiable.
/// Throws GraphError if the output is not a single element.
template <typename T>
std::vector<Var<T>> grad(const Var<T>& output, const std::vector<Var<T>>& inputs,
                         bool create_graph = false);

// Elementwise (operands must have identical shapes).
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T factor);
template <typename T> Var<T> add_scalar(const Var<T>& a, T offset);
template <typename T> Var<T> relu(const Var<T>& a);
template <typename T> Var<T> leaky_relu(const Var<T>& a, T slope);
template <typename T> Var<T> tanh(const Var<T>& a);
template <typename T> Var<T> square(const Var<T>& a);
/// Square root whose derivative is taken as 0 at 0.
template <typename T> Var<T> sqrt(const Var<T>& a);
template <typename T> Var<T> rsqrt(const Var<T>& a);
/// 1/a, with 0 where a == 0.
template <typename T> Var<T> safe_reciprocal(const Var<T>& a);

// Reductions and their broadcasting duals.
template <typename T> Var<T> sum(const Var<T>& a); ///< shape [1]
template <typename T> Var<T> broadcast_scalar(const Var<T>& s, const Shape& shape);
template <typename T> Var<T> sum_per_sample(const Var<T>& a); ///< [B, ...] -> [B]
template <typename T> Var<T> broadcast_per_sample(const Var<T>& v, const Shape& shape);
template <typename T> Var<T> sum_per_channel(const Var<T>& a); ///< [..., C] -> [C]
template <typename T> Var<T> broadcast_per_channel(const Var<T>& v, const Shape& shape);

template <typename T> Var<T> reshape(const Var<T>& a, const Shape& shape);

/// op(a) * op(b) for 2-D operands.
template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b, bool transpose_a = false, bool transpose_b = false);

struct Stride2d {
    int h = 1;
    int w = 1;
};

/// Valid (unpadded) strided convolution. x: [B,H,W,Cin], w: [kh,kw,Cin,Cout].
template <typename T> Var<T> conv2d(const Var<T>& x, const Var<T>& w, Stride2d stride);

/// Adjoint of conv2d. y: [B,h,w,Cout], w: [kh,kw,Cin,Cout] -> [B,out_h,out_w,Cin].
/// Requires (out - k) / stride + 1 == in along both axes.
template <typename T>
Var<T> conv_transpose2d(const Var<T>& y, const Var<T>& w, Stride2d stride, int out_h, int out_w);

/// Weight gradient of conv2d: x: [B,H,W,Cin], dy: [B,h,w,Cout] -> [kh,kw,Cin,Cout].
template <typename T>
Var<T> conv2d_weight_grad(const Var<T>& x, const Var<T>& dy, Stride2d stride, int kernel_h,
                          int kernel_w);

// Composites.
template <typename T> Var<T> mean(const Var<T>& a) { return scale(sum(a), T(1) / T(a.size())); }

/// Per-sample Euclidean norm over all non-batch axes: [B, ...] -> [B].
template <typename T> Var<T> sample_norm(const Var<T>& a) { return sqrt(sum_per_sample(square(a))); }

template <typename T> Var<T> operator+(const Var<T>& a, const Var<T>& b) { return add(a, b); }
template <typename T> Var<T> operator-(const Var<T>& a, const Var<T>& b) { return sub(a, b); }
template <typename T> Var<T> operator*(const Var<T>& a, const Var<T>& b) { return mul(a, b); }

} // namespace tsigan::ag
