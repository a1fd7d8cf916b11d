#include "tsigan/network.hpp"

#include <cmath>
#include <cstring>

namespace tsigan {

using ag::Var;

namespace {

template <typename T>
Var<T> constant(Tensor<T> t)
{
    return Var<T>(std::move(t), false);
}

template <typename T>
Var<T> channel_affine(const Var<T>& h, const Var<T>& scale, const Var<T>& shift)
{
    return ag::add(ag::mul(h, ag::broadcast_per_channel(scale, h.shape())),
                   ag::broadcast_per_channel(shift, h.shape()));
}

template <typename T>
Var<T> batch_norm(const Var<T>& h, LayerParams<T>& p, Mode mode, bool allow_update)
{
    const int channels = h.shape().back();
    const T eps = T(kNormEpsilon);
    if (mode == Mode::inference) {
        Tensor<T> inv(Shape{channels});
        for (int c = 0; c < channels; ++c) {
            inv[std::size_t(c)] = T(1) / std::sqrt(p.running_var[std::size_t(c)] + eps);
        }
        const Var<T> a = ag::mul(p.gamma, constant(std::move(inv)));
        const Var<T> b = ag::sub(p.beta, ag::mul(a, constant(p.running_mean)));
        return channel_affine(h, a, b);
    }

    const T count = T(h.size() / std::size_t(channels));
    const Var<T> mu = ag::scale(ag::sum_per_channel(h), T(1) / count);
    const Var<T> centered = ag::sub(h, ag::broadcast_per_channel(mu, h.shape()));
    const Var<T> var = ag::scale(ag::sum_per_channel(ag::square(centered)), T(1) / count);
    const Var<T> inv = ag::rsqrt(ag::add_scalar(var, eps));

    if (mode == Mode::train_update && allow_update) {
        const T m = T(kBatchNormMomentum);
        for (int c = 0; c < channels; ++c) {
            const auto i = std::size_t(c);
            p.running_mean[i] = m * p.running_mean[i] + (T(1) - m) * mu.value()[i];
            p.running_var[i] = m * p.running_var[i] + (T(1) - m) * var.value()[i];
        }
    }
    return channel_affine(centered, ag::mul(inv, p.gamma), p.beta);
}

template <typename T>
Var<T> layer_norm(const Var<T>& h, const LayerParams<T>& p)
{
    const T eps = T(kNormEpsilon);
    const T count = T(h.size() / std::size_t(h.shape()[0]));
    const Var<T> mu = ag::scale(ag::sum_per_sample(h), T(1) / count);
    const Var<T> centered = ag::sub(h, ag::broadcast_per_sample(mu, h.shape()));
    const Var<T> var = ag::scale(ag::sum_per_sample(ag::square(centered)), T(1) / count);
    const Var<T> inv = ag::rsqrt(ag::add_scalar(var, eps));
    const Var<T> normalized = ag::mul(centered, ag::broadcast_per_sample(inv, h.shape()));
    return channel_affine(normalized, p.gamma, p.beta);
}

LayerSpec conv(int k, int s, int in, int out, Norm norm, Activation act)
{
    return {LayerKind::conv, k, k, s, s, in, out, norm, act};
}

LayerSpec tconv(int k, int s, int in, int out, Norm norm, Activation act)
{
    return {LayerKind::transposed_conv, k, k, s, s, in, out, norm, act};
}

LayerSpec dense(int in, int out, Norm norm, Activation act)
{
    return {LayerKind::fully_connected, 1, 1, 1, 1, in, out, norm, act};
}

Shape weight_shape(const LayerSpec& s)
{
    switch (s.kind) {
    case LayerKind::conv:
        return {s.kernel_h, s.kernel_w, s.in_units, s.units};
    case LayerKind::transposed_conv:
        return {s.kernel_h, s.kernel_w, s.units, s.in_units};
    case LayerKind::fully_connected:
        break;
    }
    return {s.in_units, s.units};
}

template <typename T>
Tensor<T> copy_tensor(const Tensor<T>& t)
{
    return t.empty() ? Tensor<T>() : Tensor<T>(t.shape(), std::vector<T>(t.values().begin(), t.values().end()));
}

template <typename T>
Var<T> clone_leaf(const Var<T>& v)
{
    return v.defined() ? Var<T>(copy_tensor(v.value()), v.requires_grad()) : Var<T>{};
}

} // namespace

template <typename T>
Network<T>::Network(std::string name, Shape input_shape, std::vector<LayerSpec> layers)
    : name_(std::move(name)), input_shape_(std::move(input_shape)), layers_(std::move(layers))
{
    if (layers_.empty()) {
        throw InvalidArgument("network '" + name_ + "' has no layers");
    }
    params_.reserve(layers_.size());
    for (const LayerSpec& s : layers_) {
        LayerParams<T> p;
        p.weight = Var<T>(Tensor<T>(weight_shape(s)), true);
        p.bias = Var<T>(Tensor<T>(Shape{s.units}), true);
        if (s.norm != Norm::none) {
            p.gamma = Var<T>(Tensor<T>(Shape{s.units}, T(1)), true);
            p.beta = Var<T>(Tensor<T>(Shape{s.units}), true);
        }
        if (s.norm == Norm::batch) {
            p.running_mean = Tensor<T>(Shape{s.units});
            p.running_var = Tensor<T>(Shape{s.units}, T(1));
        }
        params_.push_back(std::move(p));
    }
    // Shape-check the stack once so malformed architectures fail at construction.
    (void)output_shape();
}

template <typename T>
Shape Network<T>::output_shape() const
{
    Shape s = input_shape_;
    for (const LayerSpec& l : layers_) {
        const int in_c = s.empty() ? 0 : s.back();
        if (l.kind == LayerKind::fully_connected) {
            if (int(shape_size(s)) != l.in_units) {
                throw ShapeMismatch(name_ + ": dense layer expects " + std::to_string(l.in_units) +
                                    " features, got " + shape_string(s));
            }
            s = {l.units};
            continue;
        }
        if (s.size() != 3 || in_c != l.in_units) {
            throw ShapeMismatch(name_ + ": convolution expects " + std::to_string(l.in_units) +
                                " channels, got " + shape_string(s));
        }
        if (l.kind == LayerKind::conv) {
            if (s[0] < l.kernel_h || s[1] < l.kernel_w) {
                throw ShapeMismatch(name_ + ": kernel larger than input " + shape_string(s));
            }
            s = {(s[0] - l.kernel_h) / l.stride_h + 1, (s[1] - l.kernel_w) / l.stride_w + 1, l.units};
        } else {
            s = {(s[0] - 1) * l.stride_h + l.kernel_h, (s[1] - 1) * l.stride_w + l.kernel_w, l.units};
        }
    }
    return s;
}

template <typename T>
void Network<T>::initialize(std::mt19937_64& rng)
{
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const LayerSpec& s = layers_[i];
        LayerParams<T>& p = params_[i];
        const double fan_in = s.kind == LayerKind::fully_connected
                                  ? double(s.in_units)
                                  : double(s.kernel_h) * s.kernel_w * s.in_units;
        const bool relu_family =
            s.activation == Activation::relu || s.activation == Activation::leaky_relu;
        std::normal_distribution<double> dist(0.0, std::sqrt((relu_family ? 2.0 : 1.0) / fan_in));
        for (T& w : p.weight.mutable_value().values()) {
            w = T(dist(rng));
        }
        for (T& b : p.bias.mutable_value().values()) {
            b = T(0);
        }
        if (p.gamma.defined()) {
            for (T& g : p.gamma.mutable_value().values()) {
                g = T(1);
            }
            for (T& b : p.beta.mutable_value().values()) {
                b = T(0);
            }
        }
        if (!p.running_mean.empty()) {
            p.running_mean = Tensor<T>(p.running_mean.shape());
            p.running_var = Tensor<T>(p.running_var.shape(), T(1));
        }
    }
}

template <typename T>
Var<T> Network<T>::forward(const Var<T>& x, Mode mode)
{
    return run(x, mode, true);
}

template <typename T>
Var<T> Network<T>::forward(const Var<T>& x, Mode mode) const
{
    if (mode == Mode::train_update) {
        throw InvalidArgument(name_ + ": running statistics cannot be updated through a const network");
    }
    return const_cast<Network*>(this)->run(x, mode, false);
}

template <typename T>
Var<T> Network<T>::run(const Var<T>& x, Mode mode, bool allow_update)
{
    const Shape& xs = x.shape();
    if (xs.size() != input_shape_.size() + 1 || Shape(xs.begin() + 1, xs.end()) != input_shape_) {
        throw ShapeMismatch(name_ + ": expected input [B" +
                            shape_string(input_shape_).replace(0, 1, "x") + ", got " +
                            shape_string(xs));
    }
    const int batch = xs[0];

    Var<T> h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const LayerSpec& s = layers_[i];
        LayerParams<T>& p = params_[i];
        const ag::Stride2d stride{s.stride_h, s.stride_w};
        switch (s.kind) {
        case LayerKind::conv:
            h = ag::conv2d(h, p.weight, stride);
            break;
        case LayerKind::transposed_conv: {
            const int out_h = (h.shape()[1] - 1) * s.stride_h + s.kernel_h;
            const int out_w = (h.shape()[2] - 1) * s.stride_w + s.kernel_w;
            h = ag::conv_transpose2d(h, p.weight, stride, out_h, out_w);
            break;
        }
        case LayerKind::fully_connected:
            if (h.value().rank() != 2) {
                h = ag::reshape(h, Shape{batch, int(h.size() / std::size_t(batch))});
            }
            h = ag::matmul(h, p.weight);
            break;
        }
        h = ag::add(h, ag::broadcast_per_channel(p.bias, h.shape()));

        switch (s.norm) {
        case Norm::batch:
            h = batch_norm(h, p, mode, allow_update);
            break;
        case Norm::layer:
            h = layer_norm(h, p);
            break;
        case Norm::none:
            break;
        }

        switch (s.activation) {
        case Activation::relu:
            h = ag::relu(h);
            break;
        case Activation::leaky_relu:
            h = ag::leaky_relu(h, T(kLeakySlope));
            break;
        case Activation::tanh:
            h = ag::tanh(h);
            break;
        case Activation::none:
            break;
        }
    }
    return h;
}

template <typename T>
std::vector<Parameter<T>> Network<T>::parameters() const
{
    std::vector<Parameter<T>> out;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const std::string prefix = name_ + "." + std::to_string(i) + ".";
        const LayerParams<T>& p = params_[i];
        out.push_back({prefix + "weight", p.weight, true});
        out.push_back({prefix + "bias", p.bias, false});
        if (p.gamma.defined()) {
            out.push_back({prefix + "gamma", p.gamma, false});
            out.push_back({prefix + "beta", p.beta, false});
        }
    }
    return out;
}

template <typename T>
Network<T> Network<T>::clone() const
{
    Network copy(name_, input_shape_, layers_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const LayerParams<T>& src = params_[i];
        LayerParams<T>& dst = copy.params_[i];
        dst.weight = clone_leaf(src.weight);
        dst.bias = clone_leaf(src.bias);
        dst.gamma = clone_leaf(src.gamma);
        dst.beta = clone_leaf(src.beta);
        dst.running_mean = copy_tensor(src.running_mean);
        dst.running_var = copy_tensor(src.running_var);
    }
    return copy;
}

template <typename T>
template <typename U>
Network<U> Network<T>::cast() const
{
    Network<U> out(name_, input_shape_, layers_);
    auto convert = [](const Var<T>& v) {
        return v.defined() ? Var<U>(v.value().template cast<U>(), v.requires_grad()) : Var<U>{};
    };
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const LayerParams<T>& src = params_[i];
        LayerParams<U>& dst = out.layer_params()[i];
        dst.weight = convert(src.weight);
        dst.bias = convert(src.bias);
        dst.gamma = convert(src.gamma);
        dst.beta = convert(src.beta);
        dst.running_mean = src.running_mean.empty() ? Tensor<U>() : src.running_mean.template cast<U>();
        dst.running_var = src.running_var.empty() ? Tensor<U>() : src.running_var.template cast<U>();
    }
    return out;
}

std::vector<LayerSpec> encoder_layers(int z_dim)
{
    return {conv(7, 3, kImageChannels, 48, Norm::batch, Activation::relu),
            conv(5, 3, 48, 96, Norm::batch, Activation::relu),
            conv(4, 2, 96, 192, Norm::batch, Activation::relu),
            conv(2, 1, 192, z_dim, Norm::none, Activation::none)};
}

std::vector<LayerSpec> decoder_layers(int z_dim)
{
    return {tconv(2, 1, z_dim, 192, Norm::batch, Activation::leaky_relu),
            tconv(4, 2, 192, 96, Norm::batch, Activation::leaky_relu),
            tconv(5, 3, 96, 48, Norm::batch, Activation::leaky_relu),
            tconv(7, 3, 48, kImageChannels, Norm::none, Activation::tanh)};
}

std::vector<LayerSpec> critic_x_layers()
{
    return {conv(7, 3, kImageChannels, 48, Norm::layer, Activation::leaky_relu),
            conv(5, 3, 48, 96, Norm::layer, Activation::leaky_relu),
            conv(4, 2, 96, 192, Norm::layer, Activation::leaky_relu),
            conv(2, 1, 192, 1, Norm::none, Activation::none)};
}

std::vector<LayerSpec> critic_z_layers(int z_dim)
{
    return {dense(z_dim, 50, Norm::layer, Activation::relu),
            dense(50, 25, Norm::layer, Activation::relu),
            dense(25, 1, Norm::none, Activation::none)};
}

template <typename T>
BasicModel<T> make_model(int z_dim, std::uint64_t seed)
{
    if (z_dim < 1) {
        throw InvalidArgument("z_dim must be positive");
    }
    const Shape image{kImageSize, kImageSize, kImageChannels};
    BasicModel<T> m{z_dim,
                    Network<T>("encoder", image, encoder_layers(z_dim)),
                    Network<T>("decoder", Shape{1, 1, z_dim}, decoder_layers(z_dim)),
                    Network<T>("critic_x", image, critic_x_layers()),
                    Network<T>("critic_z", Shape{z_dim}, critic_z_layers(z_dim))};
    std::mt19937_64 rng(seed);
    m.encoder.initialize(rng);
    m.decoder.initialize(rng);
    m.critic_x.initialize(rng);
    m.critic_z.initialize(rng);
    return m;
}

template <typename T>
Var<T> encoder_forward(const BasicModel<T>& m, const Var<T>& images, Mode mode)
{
    return m.encoder.forward(images, mode);
}

template <typename T>
Var<T> decoder_forward(const BasicModel<T>& m, const Var<T>& latent, Mode mode)
{
    return m.decoder.forward(latent, mode);
}

template <typename T>
Var<T> critic_x_forward(const BasicModel<T>& m, const Var<T>& images)
{
    const Var<T> out = m.critic_x.forward(images, Mode::train);
    return ag::reshape(out, Shape{out.shape()[0]});
}

template <typename T>
Var<T> critic_z_forward(const BasicModel<T>& m, const Var<T>& latent)
{
    Var<T> flat = latent;
    if (latent.value().rank() == 4) {
        const Shape& s = latent.shape();
        if (s[1] != 1 || s[2] != 1) {
            throw ShapeMismatch("critic_z: expected latent [B x 1 x 1 x z], got " + shape_string(s));
        }
        flat = ag::reshape(latent, Shape{s[0], s[3]});
    }
    const Var<T> out = m.critic_z.forward(flat, Mode::train);
    return ag::reshape(out, Shape{out.shape()[0]});
}

namespace {

bool same_bits(const Tensor<float>& a, const Tensor<float>& b)
{
    return a.shape() == b.shape() &&
           (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
}

bool same_network(const Network<float>& a, const Network<float>& b)
{
    if (a.layers() != b.layers() || a.input_shape() != b.input_shape()) {
        return false;
    }
    auto leaf = [](const Var<float>& v) { return v.defined() ? v.value() : Tensor<float>(); };
    for (std::size_t i = 0; i < a.layer_params().size(); ++i) {
        const auto& p = a.layer_params()[i];
        const auto& q = b.layer_params()[i];
        if (!same_bits(leaf(p.weight), leaf(q.weight)) || !same_bits(leaf(p.bias), leaf(q.bias)) ||
            !same_bits(leaf(p.gamma), leaf(q.gamma)) || !same_bits(leaf(p.beta), leaf(q.beta)) ||
            !same_bits(p.running_mean, q.running_mean) || !same_bits(p.running_var, q.running_var)) {
            return false;
        }
    }
    return true;
}

} // namespace

bool identical(const ModelParams& a, const ModelParams& b)
{
    return a.z_dim == b.z_dim && same_network(a.encoder, b.encoder) &&
           same_network(a.decoder, b.decoder) && same_network(a.critic_x, b.critic_x) &&
           same_network(a.critic_z, b.critic_z);
}

template class Network<float>;
template class Network<double>;
template Network<double> Network<float>::cast<double>() const;
template Network<float> Network<double>::cast<float>() const;

#define TSIGAN_INSTANTIATE(T)                                                                   \
    template BasicModel<T> make_model<T>(int, std::uint64_t);                                   \
    template Var<T> encoder_forward<T>(const BasicModel<T>&, const Var<T>&, Mode);              \
    template Var<T> decoder_forward<T>(const BasicModel<T>&, const Var<T>&, Mode);              \
    template Var<T> critic_x_forward<T>(const BasicModel<T>&, const Var<T>&);                   \
    template Var<T> critic_z_forward<T>(const BasicModel<T>&, const Var<T>&);

TSIGAN_INSTANTIATE(float)
TSIGAN_INSTANTIATE(double)

#undef TSIGAN_INSTANTIATE

} // namespace tsigan
