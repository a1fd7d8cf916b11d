#pragma once

#include "tsigan/autograd.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace tsigan {

enum class LayerKind : std::uint8_t { conv = 0, transposed_conv = 1, fully_connected = 2 };
enum class Norm : std::uint8_t { none = 0, batch = 1, layer = 2 };
enum class Activation : std::uint8_t { none = 0, relu = 1, leaky_relu = 2, tanh = 3 };

/// One row of an architecture table. Convolutions use valid padding.
struct LayerSpec {
    LayerKind kind = LayerKind::conv;
    int kernel_h = 1;
    int kernel_w = 1;
    int stride_h = 1;
    int stride_w = 1;
    int in_units = 1; ///< input channels (or features for fully connected layers)
    int units = 1;    ///< output channels (or features)
    Norm norm = Norm::none;
    Activation activation = Activation::none;

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

inline constexpr float kLeakySlope = 0.2f;
inline constexpr double kNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.99;

/// How batch normalization behaves in a forward pass.
enum class Mode {
    inference,   ///< running statistics
    train,       ///< batch statistics, running statistics left alone
    train_update ///< batch statistics, running statistics updated
};

template <typename T>
struct Parameter {
    std::string name;
    ag::Var<T> var;
    bool decays = false; ///< kernels take weight decay; biases and norm affines do not
};

template <typename T>
struct LayerParams {
    ag::Var<T> weight;
    ag::Var<T> bias;
    ag::Var<T> gamma; ///< normalization scale (per output channel)
    ag::Var<T> beta;
    Tensor<T> running_mean;
    Tensor<T> running_var;
};

/// A feed-forward stack of layers with a fixed per-sample input shape.
template <typename T>
class Network {
public:
    Network() = default;
    /// input_shape excludes the batch axis, e.g. {64, 64, 2} or {100}.
    Network(std::string name, Shape input_shape, std::vector<LayerSpec> layers);

    const std::string& name() const noexcept { return name_; }
    const Shape& input_shape() const noexcept { return input_shape_; }
    const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
    /// Per-sample output shape.
    Shape output_shape() const;

    /// Gaussian weights with std sqrt(2/fan_in) ahead of ReLU-family activations and
    /// sqrt(1/fan_in) otherwise; zero biases; identity normalization.
    void initialize(std::mt19937_64& rng);

    /// Throws ShapeMismatch unless x is [B, input_shape...].
    ag::Var<T> forward(const ag::Var<T>& x, Mode mode);
    /// Forward pass that never touches running statistics (mode must not be train_update).
    ag::Var<T> forward(const ag::Var<T>& x, Mode mode = Mode::inference) const;

    std::vector<Parameter<T>> parameters() const;
    std::vector<LayerParams<T>>& layer_params() noexcept { return params_; }
    const std::vector<LayerParams<T>>& layer_params() const noexcept { return params_; }

    /// Deep copy (parameters are otherwise shared between copies of a Network).
    Network clone() const;

    template <typename U>
    Network<U> cast() const;

private:
    ag::Var<T> run(const ag::Var<T>& x, Mode mode, bool allow_update);

    std::string name_;
    Shape input_shape_;
    std::vector<LayerSpec> layers_;
    std::vector<LayerParams<T>> params_;
};

// Default encoder, decoder and critic architectures.
std::vector<LayerSpec> encoder_layers(int z_dim);
std::vector<LayerSpec> decoder_layers(int z_dim);
std::vector<LayerSpec> critic_x_layers();
std::vector<LayerSpec> critic_z_layers(int z_dim);

inline constexpr int kImageSize = 64;
inline constexpr int kImageChannels = 2;

/// Encoder E, decoder G and critics Cx, Cz.
template <typename T>
struct BasicModel {
    int z_dim = 100;
    Network<T> encoder;
    Network<T> decoder;
    Network<T> critic_x;
    Network<T> critic_z;

    BasicModel clone() const
    {
        return {z_dim, encoder.clone(), decoder.clone(), critic_x.clone(), critic_z.clone()};
    }
};

using ModelParams = BasicModel<float>;

/// Default model with freshly initialized weights.
template <typename T>
BasicModel<T> make_model(int z_dim, std::uint64_t seed);

// B x 64 x 64 x 2 -> B x 1 x 1 x z_dim
template <typename T>
ag::Var<T> encoder_forward(const BasicModel<T>& m, const ag::Var<T>& images, Mode mode = Mode::inference);
// B x 1 x 1 x z_dim -> B x 64 x 64 x 2
template <typename T>
ag::Var<T> decoder_forward(const BasicModel<T>& m, const ag::Var<T>& latent, Mode mode = Mode::inference);
// B x 64 x 64 x 2 -> B
template <typename T>
ag::Var<T> critic_x_forward(const BasicModel<T>& m, const ag::Var<T>& images);
// B x z_dim (or B x 1 x 1 x z_dim) -> B
template <typename T>
ag::Var<T> critic_z_forward(const BasicModel<T>& m, const ag::Var<T>& latent);

/// Every parameter and running statistic, bit-for-bit.
bool identical(const ModelParams& a, const ModelParams& b);

struct CheckpointMeta {
    std::uint32_t window_size = 64;
    std::uint32_t step = 1;
    std::uint64_t seed = 0;
};

/// Versioned little-endian binary container: header, layer specs, then named tensors.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& model,
                     const CheckpointMeta& meta = {});
ModelParams load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta = nullptr);

} // namespace tsigan
