#pragma once

#include "tsigan/encoding.hpp"
#include "tsigan/network.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

namespace tsigan {

/// How the critics are kept (approximately) 1-Lipschitz.
enum class LipschitzMode {
    gradient_penalty, ///< exact double backward through the input-gradient norm
    weight_clipping   ///< clamp every critic parameter to [-clip, clip] after each update
};

struct TrainConfig {
    int iterations = 5000;
    int batch_size = 128;
    double learning_rate = 1e-4;
    double weight_decay = 1e-4;
    int z_dim = 100;
    double gp_coefficient = 10.0;
    int critic_steps = 5;
    std::uint64_t seed = 0;
    LipschitzMode lipschitz = LipschitzMode::gradient_penalty;
    double clip_value = 0.01;
    double rmsprop_decay = 0.9;
    double rmsprop_epsilon = 1e-8;

    void validate() const;
};

/// Losses of one outer iteration. Critic terms come from the last critic update.
struct IterationLog {
    int iteration = 0;
    double loss_cx = 0.0;   ///< mean Cx(x) - mean Cx(G(z))
    double loss_cz = 0.0;   ///< mean Cz(z) - mean Cz(E(x))
    double loss_gp_x = 0.0;
    double loss_gp_z = 0.0;
    double cycle_E = 0.0;
    double cycle_G = 0.0;
};

void write_log_header(std::ostream& out);
void write_log_row(std::ostream& out, const IterationLog& row);

/// Random access to training images (kImageSize x kImageSize x 2, channel-last).
class ImageSource {
public:
    virtual ~ImageSource() = default;
    virtual std::size_t count() const = 0;
    virtual void fill(std::size_t i, std::span<float> out) const = 0;
};

/// Images held in memory. The windows must outlive the source.
class EncodedImages final : public ImageSource {
public:
    explicit EncodedImages(std::span<const EncodedWindow> windows);
    std::size_t count() const override { return windows_.size(); }
    void fill(std::size_t i, std::span<float> out) const override;

private:
    std::span<const EncodedWindow> windows_;
};

/// Encodes windows 0 .. count-1 of a series on demand. The series must outlive the source.
class SeriesImages final : public ImageSource {
public:
    SeriesImages(const TimeSeries& series, const WindowConfig& cfg, std::size_t count);
    std::size_t count() const override { return count_; }
    void fill(std::size_t i, std::span<float> out) const override;

private:
    const TimeSeries& series_;
    WindowConfig cfg_;
    std::size_t count_;
};

// Loss terms. Scores are [B] vectors; all losses are [1].

/// mean(real) - mean(fake). Throws EmptyBatch or ShapeMismatch.
template <typename T>
ag::Var<T> wasserstein_loss(const ag::Var<T>& real, const ag::Var<T>& fake);
template <typename T>
ag::Var<T> wasserstein_loss_x(const ag::Var<T>& real, const ag::Var<T>& fake)
{
    return wasserstein_loss(real, fake);
}
template <typename T>
ag::Var<T> wasserstein_loss_z(const ag::Var<T>& prior, const ag::Var<T>& encoded)
{
    return wasserstein_loss(prior, encoded);
}

template <typename T>
using Mapping = std::function<ag::Var<T>(const ag::Var<T>&)>;

/// coefficient * mean((|grad critic(p)| - 1)^2) over the rows p of points, differentiable
/// with respect to the critic parameters. Throws NonFiniteGradient.
template <typename T>
ag::Var<T> gradient_penalty_at(const Mapping<T>& critic, const Tensor<T>& points, T coefficient);

/// Penalty at per-sample interpolates alpha * real + (1 - alpha) * fake, alpha ~ U(0, 1).
template <typename T>
ag::Var<T> gradient_penalty(const Mapping<T>& critic, const Tensor<T>& real, const Tensor<T>& fake,
                            std::mt19937_64& rng, T coefficient);

/// mean over the batch of |a_i - b_i|_2.
template <typename T>
ag::Var<T> mean_l2_distance(const ag::Var<T>& a, const ag::Var<T>& b);

/// mean |x - G(E(x))| + mean |z - E(G(z))|.
template <typename T>
ag::Var<T> cycle_loss_E(const ag::Var<T>& x, const ag::Var<T>& z, const Mapping<T>& encode,
                        const Mapping<T>& decode);
/// mean |x - G(E(x))|.
template <typename T>
ag::Var<T> cycle_loss_G(const ag::Var<T>& x, const Mapping<T>& encode, const Mapping<T>& decode);

/// RMSProp with L2 weight decay added to the gradients of decaying parameters.
class RmsProp {
public:
    RmsProp(std::vector<Parameter<float>> params, const TrainConfig& cfg);
    /// grads[i] belongs to parameters()[i]. Throws NonFiniteGradient.
    void step(const std::vector<ag::Var<float>>& grads);
    const std::vector<Parameter<float>>& parameters() const noexcept { return params_; }

private:
    std::vector<Parameter<float>> params_;
    std::vector<std::vector<float>> square_avg_;
    float lr_;
    float weight_decay_;
    float decay_;
    float epsilon_;
};

/// Alternating critic / generator optimisation of the four networks.
class Trainer {
public:
    explicit Trainer(const TrainConfig& cfg);
    Trainer(ModelParams initial, const TrainConfig& cfg);

    /// One outer iteration: critic_steps critic updates on fresh batches drawn with
    /// replacement, then one joint encoder/decoder update. Throws NonFiniteLoss.
    IterationLog step(const ImageSource& data);
    /// Same, but every update sees the given [B, 64, 64, 2] batch.
    IterationLog step(const Tensor<float>& fixed_batch);

    const ModelParams& model() const noexcept { return model_; }
    int iterations_done() const noexcept { return iteration_; }

private:
    Tensor<float> draw_batch(const ImageSource& data);
    Tensor<float> draw_latent(int batch);
    void critic_update(const Tensor<float>& images, IterationLog& log);
    void generator_update(const Tensor<float>& images, IterationLog& log);
    IterationLog run(const std::function<Tensor<float>()>& next_batch);

    TrainConfig cfg_;
    ModelParams model_;
    RmsProp critic_opt_;
    RmsProp generator_opt_;
    std::mt19937_64 rng_;
    int iteration_ = 0;
};

using TrainObserver = std::function<void(const IterationLog&)>;

/// Runs cfg.iterations outer iterations from a model initialised with cfg.seed.
/// Throws InvalidArgument for an empty source.
ModelParams train(const ImageSource& data, const TrainConfig& cfg, const TrainObserver& observe = {});
ModelParams train(std::span<const EncodedWindow> windows, const TrainConfig& cfg,
                  const TrainObserver& observe = {});

} // namespace tsigan
