#include "tsigan/autograd.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_map>
#include <unordered_set>

namespace tsigan::ag {

namespace {

thread_local bool g_grad_enabled = true;

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

template <typename T>
void require_same_shape(const char* op, const Var<T>& a, const Var<T>& b)
{
    if (a.shape() != b.shape()) {
        throw ShapeMismatch(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                            shape_string(b.shape()) + " differ");
    }
}

template <typename T, typename F>
Tensor<T> map_values(const Tensor<T>& a, F f)
{
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = f(a[i]);
    }
    return out;
}

template <typename T, typename F>
Tensor<T> zip_values(const Tensor<T>& a, const Tensor<T>& b, F f)
{
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = f(a[i], b[i]);
    }
    return out;
}

template <typename T>
Var<T> constant(Tensor<T> t)
{
    return Var<T>(std::move(t), false);
}

// Geometry of a valid convolution between an image batch and its output batch.
struct ConvGeometry {
    int batch, in_h, in_w, in_c;
    int out_h, out_w, out_c;
    int k_h, k_w;
    Stride2d stride;

    std::size_t rows() const { return std::size_t(batch) * out_h * out_w; }
    std::size_t cols() const { return std::size_t(k_h) * k_w * in_c; }
};

int conv_out_extent(int in, int k, int s)
{
    return in < k ? 0 : (in - k) / s + 1;
}

void check_stride(const char* op, Stride2d s)
{
    if (s.h < 1 || s.w < 1) {
        throw ShapeMismatch(std::string(op) + ": strides must be positive");
    }
}

// Patch matrix: row (b, oy, ox), column (ky, kx, c).
template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* cols)
{
    const std::size_t patch_row = std::size_t(g.k_w) * g.in_c;
    const std::size_t k = g.cols();
    for (int b = 0; b < g.batch; ++b) {
        for (int oy = 0; oy < g.out_h; ++oy) {
            for (int ox = 0; ox < g.out_w; ++ox) {
                T* dst = cols + ((std::size_t(b) * g.out_h + oy) * g.out_w + ox) * k;
                for (int ky = 0; ky < g.k_h; ++ky) {
                    const int iy = oy * g.stride.h + ky;
                    const T* src =
                        x + ((std::size_t(b) * g.in_h + iy) * g.in_w + std::size_t(ox) * g.stride.w) *
                                g.in_c;
                    std::memcpy(dst + ky * patch_row, src, patch_row * sizeof(T));
                }
            }
        }
    }
}

// Adjoint of im2col: scatter-add patches back onto the image.
template <typename T>
void col2im(const T* cols, const ConvGeometry& g, T* x)
{
    const std::size_t patch_row = std::size_t(g.k_w) * g.in_c;
    const std::size_t k = g.cols();
    std::fill(x, x + std::size_t(g.batch) * g.in_h * g.in_w * g.in_c, T(0));
    for (int b = 0; b < g.batch; ++b) {
        for (int oy = 0; oy < g.out_h; ++oy) {
            for (int ox = 0; ox < g.out_w; ++ox) {
                const T* src = cols + ((std::size_t(b) * g.out_h + oy) * g.out_w + ox) * k;
                for (int ky = 0; ky < g.k_h; ++ky) {
                    const int iy = oy * g.stride.h + ky;
                    T* dst =
                        x + ((std::size_t(b) * g.in_h + iy) * g.in_w + std::size_t(ox) * g.stride.w) *
                                g.in_c;
                    const T* row = src + ky * patch_row;
                    for (std::size_t i = 0; i < patch_row; ++i) {
                        dst[i] += row[i];
                    }
                }
            }
        }
    }
}

// Geometry for conv2d(x, w).
template <typename T>
ConvGeometry conv_geometry(const char* op, const Shape& x, const Shape& w, Stride2d stride)
{
    check_stride(op, stride);
    if (x.size() != 4 || w.size() != 4) {
        throw ShapeMismatch(std::string(op) + ": expected rank-4 input and kernel, got " +
                            shape_string(x) + " and " + shape_string(w));
    }
    if (x[3] != w[2]) {
        throw ShapeMismatch(std::string(op) + ": input channels " + std::to_string(x[3]) +
                            " do not match kernel " + shape_string(w));
    }
    ConvGeometry g{x[0], x[1], x[2], x[3], conv_out_extent(x[1], w[0], stride.h),
                   conv_out_extent(x[2], w[1], stride.w), w[3], w[0], w[1], stride};
    if (g.out_h < 1 || g.out_w < 1) {
        throw ShapeMismatch(std::string(op) + ": kernel " + shape_string(w) +
                            " does not fit input " + shape_string(x));
    }
    return g;
}

} // namespace

bool grad_enabled() noexcept
{
    return g_grad_enabled;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled)
{
    g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard()
{
    g_grad_enabled = previous_;
}

namespace {

class GradModeGuard {
public:
    explicit GradModeGuard(bool enabled) : previous_(g_grad_enabled) { g_grad_enabled = enabled; }
    ~GradModeGuard() { g_grad_enabled = previous_; }
    GradModeGuard(const GradModeGuard&) = delete;
    GradModeGuard& operator=(const GradModeGuard&) = delete;

private:
    bool previous_;
};

} // namespace

template <typename T>
std::vector<Var<T>> grad(const Var<T>& output, const std::vector<Var<T>>& inputs, bool create_graph)
{
    if (!output.defined() || output.size() != 1) {
        throw GraphError("gradient requested of a non-scalar output" +
                         (output.defined() ? " of shape " + shape_string(output.shape()) : ""));
    }

    std::vector<Var<T>> result;
    result.reserve(inputs.size());
    if (!output.requires_grad()) {
        for (const auto& in : inputs) {
            result.push_back(constant(Tensor<T>(in.shape())));
        }
        return result;
    }

    std::unordered_set<const Node<T>*> targets;
    for (const auto& in : inputs) {
        targets.insert(in.node());
    }

    // Post-order: every node appears after all of its inputs.
    std::vector<Node<T>*> order;
    std::unordered_map<const Node<T>*, bool> leads_to_target;
    {
        std::vector<std::pair<Node<T>*, std::size_t>> stack{{output.node(), 0}};
        std::unordered_set<const Node<T>*> visited{output.node()};
        while (!stack.empty()) {
            auto& [node, next] = stack.back();
            if (next < node->inputs.size()) {
                Node<T>* child = node->inputs[next++].node();
                if (child->requires_grad && visited.insert(child).second) {
                    stack.emplace_back(child, 0);
                }
                continue;
            }
            bool leads = targets.count(node) > 0;
            for (const auto& in : node->inputs) {
                auto it = leads_to_target.find(in.node());
                leads = leads || (it != leads_to_target.end() && it->second);
            }
            leads_to_target[node] = leads;
            order.push_back(node);
            stack.pop_back();
        }
    }

    GradModeGuard mode(create_graph);
    std::unordered_map<const Node<T>*, Var<T>> grads;
    grads[output.node()] = constant(Tensor<T>(output.shape(), T(1)));

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* node = *it;
        auto found = grads.find(node);
        if (found == grads.end() || !node->backward) {
            continue;
        }
        std::vector<bool> needed(node->inputs.size(), false);
        bool any = false;
        for (std::size_t i = 0; i < node->inputs.size(); ++i) {
            const auto& in = node->inputs[i];
            needed[i] = in.requires_grad() && leads_to_target[in.node()];
            any = any || needed[i];
        }
        if (!any) {
            continue;
        }
        const Var<T> upstream = found->second;
        std::vector<Var<T>> partials = node->backward(node->inputs, upstream, needed);
        for (std::size_t i = 0; i < node->inputs.size(); ++i) {
            if (!needed[i]) {
                continue;
            }
            if (!partials[i].defined()) {
                throw GraphError(std::string("backward of '") + node->op +
                                 "' did not produce a required gradient");
            }
            auto& slot = grads[node->inputs[i].node()];
            slot = slot.defined() ? add(slot, partials[i]) : partials[i];
        }
    }

    for (const auto& in : inputs) {
        auto found = grads.find(in.node());
        result.push_back(found != grads.end() ? found->second : constant(Tensor<T>(in.shape())));
    }
    return result;
}

// --- elementwise -----------------------------------------------------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b)
{
    require_same_shape("add", a, b);
    return make_op<T>("add", zip_values(a.value(), b.value(), std::plus<T>{}), {a, b},
                      [](const auto&, const Var<T>& g, const auto&) {
                          return std::vector<Var<T>>{g, g};
                      });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b)
{
    require_same_shape("sub", a, b);
    return make_op<T>("sub", zip_values(a.value(), b.value(), std::minus<T>{}), {a, b},
                      [](const auto&, const Var<T>& g, const std::vector<bool>& needed) {
                          return std::vector<Var<T>>{g, needed[1] ? scale(g, T(-1)) : Var<T>{}};
                      });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b)
{
    require_same_shape("mul", a, b);
    return make_op<T>("mul", zip_values(a.value(), b.value(), std::multiplies<T>{}), {a, b},
                      [](const std::vector<Var<T>>& in, const Var<T>& g,
                         const std::vector<bool>& needed) {
                          return std::vector<Var<T>>{needed[0] ? mul(g, in[1]) : Var<T>{},
                                                     needed[1] ? mul(g, in[0]) : Var<T>{}};
                      });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor)
{
    return make_op<T>("scale", map_values(a.value(), [factor](T v) { return v * factor; }), {a},
                      [factor](const auto&, const Var<T>& g, const auto&) {
                          return std::vector<Var<T>>{scale(g, factor)};
                      });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T offset)
{
    return make_op<T>("add_scalar", map_values(a.value(), [offset](T v) { return v + offset; }), {a},
                      [](const auto&, const Var<T>& g, const auto&) {
                          return std::vector<Var<T>>{g};
                      });
}

template <typename T>
Var<T> relu(const Var<T>& a)
{
    return leaky_relu(a, T(0));
}

template <typename T>
Var<T> leaky_relu(const Var<T>& a, T slope)
{
    return make_op<T>(
        slope == T(0) ? "relu" : "leaky_relu",
        map_values(a.value(), [slope](T v) { return v > T(0) ? v : slope * v; }), {a},
        [slope](const std::vector<Var<T>>& in, const Var<T>& g, const auto&) {
            // The local slope is piecewise constant, so it enters as a constant.
            auto mask = map_values(in[0].value(), [slope](T v) { return v > T(0) ? T(1) : slope; });
            return std::vector<Var<T>>{mul(g, constant(std::move(mask)))};
        });
}

template <typename T>
Var<T> tanh(const Var<T>& a)
{
    return make_op<T>("tanh", map_values(a.value(), [](T v) { return std::tanh(v); }), {a},
                      [](const std::vector<Var<T>>& in, const Var<T>& g, const auto&) {
                          const Var<T> y = tanh(in[0]);
                          return std::vector<Var<T>>{mul(g, add_scalar(scale(square(y), T(-1)), T(1)))};
                      });
}

template <typename T>
Var<T> square(const Var<T>& a)
{
    return make_op<T>("square", map_values(a.value(), [](T v) { return v * v; }), {a},
                      [](const std::vector<Var<T>>& in, const Var<T>& g, const auto&) {
                          return std::vector<Var<T>>{mul(g, scale(in[0], T(2)))};
                      });
}

template <typename T>
Var<T> sqrt(const Var<T>& a)
{
    return make_op<T>("sqrt", map_values(a.value(), [](T v) { return std::sqrt(v); }), {a},
                      [](const std::vector<Var<T>>& in, const Var<T>& g, const auto&) {
                          return std::vector<Var<T>>{
                              mul(g, scale(safe_reciprocal(sqrt(in[0])), T(0.5)))};
                      });
}

template <typename T>
Var<T> rsqrt(const Var<T>& a)
{
    return make_op<T>("rsqrt", map_values(a.value(), [](T v) { return T(1) / std::sqrt(v); }), {a},
                      [](const std::vector<Var<T>>& in, const Var<T>& g, const auto&) {
                          const Var<T> r = rsqrt(in[0]);
                          return std::vector<Var<T>>{mul(g, scale(mul(r, square(r)), T(-0.5)))};
                      });
}

template <typename T>
Var<T> safe_reciprocal(const Var<T>& a)
{
    return make_op<T>("safe_reciprocal",
                      map_values(a.value(), [](T v) { return v == T(0) ? T(0) : T(1) / v; }), {a},
                      [](const std::vector<Var<T>>& in, const Var<T>& g, const auto&) {
                          return std::vector<Var<T>>{
                              mul(g, scale(square(safe_reciprocal(in[0])), T(-1)))};
                      });
}

// --- reductions ------------------------------------------------------------

template <typename T>
Var<T> sum(const Var<T>& a)
{
    T total = T(0);
    for (T v : a.value().values()) {
        total += v;
    }
    return make_op<T>("sum", Tensor<T>({1}, total), {a},
                      [](const std::vector<Var<T>>& in, const Var<T>& g, const auto&) {
                          return std::vector<Var<T>>{broadcast_scalar(g, in[0].shape())};
                      });
}

template <typename T>
Var<T> broadcast_scalar(const Var<T>& s, const Shape& shape)
{
    if (s.size() != 1) {
        throw ShapeMismatch("broadcast_scalar: operand has shape " + shape_string(s.shape()));
    }
    return make_op<T>("broadcast_scalar", Tensor<T>(shape, s.value()[0]), {s},
                      [](const auto&, const Var<T>& g, const auto&) {
                          return std::vector<Var<T>>{sum(g)};
                      });
}

template <typename T>
Var<T> sum_per_sample(const Var<T>& a)
{
    if (a.value().rank() < 1) {
        throw ShapeMismatch("sum_per_sample: rank-0 operand");
    }
    const int batch = a.shape()[0];
    const std::size_t inner = a.size() / std::size_t(batch);
    Tensor<T> out({batch});
    for (int b = 0; b < batch; ++b) {
        T acc = T(0);
        const T* p = a.value().data() + std::size_t(b) * inner;
        for (std::size_t i = 0; i < inner; ++i) {
            acc += p[i];
        }
        out[std::size_t(b)] = acc;
    }
    return make_op<T>("sum_per_sample", std::move(out), {a},
                      [](const std::vector<Var<T>>& in, const Var<T>& g, const auto&) {
                          return std::vector<Var<T>>{broadcast_per_sample(g, in[0].shape())};
                      });
}

template <typename T>
Var<T> broadcast_per_sample(const Var<T>& v, const Shape& shape)
{
    if (v.value().rank() != 1 || shape.empty() || shape[0] != v.shape()[0]) {
        throw ShapeMismatch("broadcast_per_sample: cannot broadcast " + shape_string(v.shape()) +
                            " to " + shape_string(shape));
    }
    Tensor<T> out(shape);
    const std::size_t inner = out.size() / std::size_t(shape[0]);
    for (int b = 0; b < shape[0]; ++b) {
        std::fill_n(out.data() + std::size_t(b) * inner, inner, v.value()[std::size_t(b)]);
    }
    return make_op<T>("broadcast_per_sample", std::move(out), {v},
                      [](const auto&, const Var<T>& g, const auto&) {
                          return std::vector<Var<T>>{sum_per_sample(g)};
                      });
}

template <typename T>
Var<T> sum_per_channel(const Var<T>& a)
{
    if (a.value().rank() < 1) {
        throw ShapeMismatch("sum_per_channel: rank-0 operand");
    }
    const int channels = a.shape().back();
    Tensor<T> out({channels});
    const std::size_t n = a.size();
    const T* p = a.value().data();
    for (std::size_t i = 0; i < n; i += std::size_t(channels)) {
        for (int c = 0; c < channels; ++c) {
            out[std::size_t(c)] += p[i + std::size_t(c)];
        }
    }
    return make_op<T>("sum_per_channel", std::move(out), {a},
                      [](const std::vector<Var<T>>& in, const Var<T>& g, const auto&) {
                          return std::vector<Var<T>>{broadcast_per_channel(g, in[0].shape())};
                      });
}

template <typename T>
Var<T> broadcast_per_channel(const Var<T>& v, const Shape& shape)
{
    if (v.value().rank() != 1 || shape.empty() || shape.back() != v.shape()[0]) {
        throw ShapeMismatch("broadcast_per_channel: cannot broadcast " + shape_string(v.shape()) +
                            " to " + shape_string(shape));
    }
    Tensor<T> out(shape);
    const std::size_t channels = v.size();
    for (std::size_t i = 0; i < out.size(); i += channels) {
        std::copy_n(v.value().data(), channels, out.data() + i);
    }
    return make_op<T>("broadcast_per_channel", std::move(out), {v},
                      [](const auto&, const Var<T>& g, const auto&) {
                          return std::vector<Var<T>>{sum_per_channel(g)};
                      });
}

template <typename T>
Var<T> reshape(const Var<T>& a, const Shape& shape)
{
    return make_op<T>("reshape", a.value().reshaped(shape), {a},
                      [](const std::vector<Var<T>>& in, const Var<T>& g, const auto&) {
                          return std::vector<Var<T>>{reshape(g, in[0].shape())};
                      });
}

// --- linear algebra --------------------------------------------------------

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b, bool ta, bool tb)
{
    if (a.value().rank() != 2 || b.value().rank() != 2) {
        throw ShapeMismatch("matmul: operands must be 2-D, got " + shape_string(a.shape()) +
                            " and " + shape_string(b.shape()));
    }
    const int m = ta ? a.shape()[1] : a.shape()[0];
    const int k = ta ? a.shape()[0] : a.shape()[1];
    const int kb = tb ? b.shape()[1] : b.shape()[0];
    const int n = tb ? b.shape()[0] : b.shape()[1];
    if (k != kb) {
        throw ShapeMismatch("matmul: inner extents differ for " + shape_string(a.shape()) + " and " +
                            shape_string(b.shape()));
    }
    Tensor<T> out({m, n});
    ConstMatrixMap<T> am(a.value().data(), a.shape()[0], a.shape()[1]);
    ConstMatrixMap<T> bm(b.value().data(), b.shape()[0], b.shape()[1]);
    MatrixMap<T> om(out.data(), m, n);
    if (!ta && !tb) {
        om.noalias() = am * bm;
    } else if (ta && !tb) {
        om.noalias() = am.transpose() * bm;
    } else if (!ta && tb) {
        om.noalias() = am * bm.transpose();
    } else {
        om.noalias() = am.transpose() * bm.transpose();
    }
    return make_op<T>(
        "matmul", std::move(out), {a, b},
        [ta, tb](const std::vector<Var<T>>& in, const Var<T>& g, const std::vector<bool>& needed) {
            std::vector<Var<T>> out(2);
            if (needed[0]) {
                out[0] = ta ? matmul(in[1], g, tb, true) : matmul(g, in[1], false, !tb);
            }
            if (needed[1]) {
                out[1] = tb ? matmul(g, in[0], true, ta) : matmul(in[0], g, !ta, false);
            }
            return out;
        });
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, Stride2d stride)
{
    const ConvGeometry g = conv_geometry<T>("conv2d", x.shape(), w.shape(), stride);
    std::vector<T> cols(g.rows() * g.cols());
    im2col(x.value().data(), g, cols.data());

    Tensor<T> out({g.batch, g.out_h, g.out_w, g.out_c});
    ConstMatrixMap<T> cm(cols.data(), Eigen::Index(g.rows()), Eigen::Index(g.cols()));
    ConstMatrixMap<T> wm(w.value().data(), Eigen::Index(g.cols()), g.out_c);
    MatrixMap<T> om(out.data(), Eigen::Index(g.rows()), g.out_c);
    om.noalias() = cm * wm;

    return make_op<T>(
        "conv2d", std::move(out), {x, w},
        [stride, g](const std::vector<Var<T>>& in, const Var<T>& grad_out,
                    const std::vector<bool>& needed) {
            std::vector<Var<T>> out(2);
            if (needed[0]) {
                out[0] = conv_transpose2d(grad_out, in[1], stride, g.in_h, g.in_w);
            }
            if (needed[1]) {
                out[1] = conv2d_weight_grad(in[0], grad_out, stride, g.k_h, g.k_w);
            }
            return out;
        });
}

template <typename T>
Var<T> conv_transpose2d(const Var<T>& y, const Var<T>& w, Stride2d stride, int out_h, int out_w)
{
    check_stride("conv_transpose2d", stride);
    const Shape& ys = y.shape();
    const Shape& ws = w.shape();
    if (ys.size() != 4 || ws.size() != 4 || ys[3] != ws[3]) {
        throw ShapeMismatch("conv_transpose2d: input " + shape_string(ys) +
                            " is incompatible with kernel " + shape_string(ws));
    }
    if (out_h < 1 || out_w < 1 || conv_out_extent(out_h, ws[0], stride.h) != ys[1] ||
        conv_out_extent(out_w, ws[1], stride.w) != ys[2]) {
        throw ShapeMismatch("conv_transpose2d: output " + std::to_string(out_h) + "x" +
                            std::to_string(out_w) + " is inconsistent with input " +
                            shape_string(ys) + " and kernel " + shape_string(ws));
    }
    const ConvGeometry g{ys[0], out_h, out_w, ws[2], ys[1], ys[2], ws[3], ws[0], ws[1], stride};

    std::vector<T> cols(g.rows() * g.cols());
    ConstMatrixMap<T> ym(y.value().data(), Eigen::Index(g.rows()), g.out_c);
    ConstMatrixMap<T> wm(w.value().data(), Eigen::Index(g.cols()), g.out_c);
    MatrixMap<T> cm(cols.data(), Eigen::Index(g.rows()), Eigen::Index(g.cols()));
    cm.noalias() = ym * wm.transpose();

    Tensor<T> out({g.batch, out_h, out_w, g.in_c});
    col2im(cols.data(), g, out.data());

    return make_op<T>(
        "conv_transpose2d", std::move(out), {y, w},
        [stride, g](const std::vector<Var<T>>& in, const Var<T>& grad_out,
                    const std::vector<bool>& needed) {
            std::vector<Var<T>> out(2);
            if (needed[0]) {
                out[0] = conv2d(grad_out, in[1], stride);
            }
            if (needed[1]) {
                out[1] = conv2d_weight_grad(grad_out, in[0], stride, g.k_h, g.k_w);
            }
            return out;
        });
}

template <typename T>
Var<T> conv2d_weight_grad(const Var<T>& x, const Var<T>& dy, Stride2d stride, int kernel_h,
                          int kernel_w)
{
    check_stride("conv2d_weight_grad", stride);
    const Shape& xs = x.shape();
    const Shape& ds = dy.shape();
    if (xs.size() != 4 || ds.size() != 4 || xs[0] != ds[0] ||
        conv_out_extent(xs[1], kernel_h, stride.h) != ds[1] ||
        conv_out_extent(xs[2], kernel_w, stride.w) != ds[2]) {
        throw ShapeMismatch("conv2d_weight_grad: input " + shape_string(xs) +
                            " is inconsistent with output gradient " + shape_string(ds));
    }
    const ConvGeometry g{xs[0], xs[1], xs[2], xs[3], ds[1], ds[2], ds[3], kernel_h, kernel_w, stride};

    std::vector<T> cols(g.rows() * g.cols());
    im2col(x.value().data(), g, cols.data());
    Tensor<T> out({kernel_h, kernel_w, g.in_c, g.out_c});
    ConstMatrixMap<T> cm(cols.data(), Eigen::Index(g.rows()), Eigen::Index(g.cols()));
    ConstMatrixMap<T> dm(dy.value().data(), Eigen::Index(g.rows()), g.out_c);
    MatrixMap<T> om(out.data(), Eigen::Index(g.cols()), g.out_c);
    om.noalias() = cm.transpose() * dm;

    return make_op<T>(
        "conv2d_weight_grad", std::move(out), {x, dy},
        [stride, g](const std::vector<Var<T>>& in, const Var<T>& grad_out,
                    const std::vector<bool>& needed) {
            std::vector<Var<T>> out(2);
            if (needed[0]) {
                out[0] = conv_transpose2d(in[1], grad_out, stride, g.in_h, g.in_w);
            }
            if (needed[1]) {
                out[1] = conv2d(in[0], grad_out, stride);
            }
            return out;
        });
}

#define TSIGAN_INSTANTIATE(T)                                                                    \
    template std::vector<Var<T>> grad<T>(const Var<T>&, const std::vector<Var<T>>&, bool);       \
    template Var<T> add<T>(const Var<T>&, const Var<T>&);                                        \
    template Var<T> sub<T>(const Var<T>&, const Var<T>&);                                        \
    template Var<T> mul<T>(const Var<T>&, const Var<T>&);                                        \
    template Var<T> scale<T>(const Var<T>&, T);                                                  \
    template Var<T> add_scalar<T>(const Var<T>&, T);                                             \
    template Var<T> relu<T>(const Var<T>&);                                                      \
    template Var<T> leaky_relu<T>(const Var<T>&, T);                                             \
    template Var<T> tanh<T>(const Var<T>&);                                                      \
    template Var<T> square<T>(const Var<T>&);                                                    \
    template Var<T> sqrt<T>(const Var<T>&);                                                      \
    template Var<T> rsqrt<T>(const Var<T>&);                                                     \
    template Var<T> safe_reciprocal<T>(const Var<T>&);                                           \
    template Var<T> sum<T>(const Var<T>&);                                                       \
    template Var<T> broadcast_scalar<T>(const Var<T>&, const Shape&);                            \
    template Var<T> sum_per_sample<T>(const Var<T>&);                                            \
    template Var<T> broadcast_per_sample<T>(const Var<T>&, const Shape&);                        \
    template Var<T> sum_per_channel<T>(const Var<T>&);                                           \
    template Var<T> broadcast_per_channel<T>(const Var<T>&, const Shape&);                       \
    template Var<T> reshape<T>(const Var<T>&, const Shape&);                                     \
    template Var<T> matmul<T>(const Var<T>&, const Var<T>&, bool, bool);                         \
    template Var<T> conv2d<T>(const Var<T>&, const Var<T>&, Stride2d);                           \
    template Var<T> conv_transpose2d<T>(const Var<T>&, const Var<T>&, Stride2d, int, int);       \
    template Var<T> conv2d_weight_grad<T>(const Var<T>&, const Var<T>&, Stride2d, int, int);

TSIGAN_INSTANTIATE(float)
TSIGAN_INSTANTIATE(double)

#undef TSIGAN_INSTANTIATE

} // namespace tsigan::ag
