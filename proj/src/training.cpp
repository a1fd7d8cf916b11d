#include "tsigan/training.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace tsigan {

using ag::Var;

void TrainConfig::validate() const
{
    if (iterations < 0) {
        throw InvalidArgument("iterations must be non-negative");
    }
    if (batch_size < 1 || z_dim < 1 || critic_steps < 1) {
        throw InvalidArgument("batch size, z_dim and critic steps must be positive");
    }
    if (!(learning_rate > 0.0) || !(weight_decay >= 0.0) || !(gp_coefficient >= 0.0) ||
        !(clip_value > 0.0)) {
        throw InvalidArgument("learning rate and clip value must be positive, weight decay and "
                              "penalty coefficient non-negative");
    }
    if (!(rmsprop_decay > 0.0 && rmsprop_decay < 1.0) || !(rmsprop_epsilon > 0.0)) {
        throw InvalidArgument("RMSProp decay must lie in (0, 1) and epsilon must be positive");
    }
}

void write_log_header(std::ostream& out)
{
    out << "iter,loss_cx,loss_cz,loss_gp_x,loss_gp_z,cycle_E,cycle_G\n";
}

void write_log_row(std::ostream& out, const IterationLog& r)
{
    out << r.iteration << ',' << r.loss_cx << ',' << r.loss_cz << ',' << r.loss_gp_x << ','
        << r.loss_gp_z << ',' << r.cycle_E << ',' << r.cycle_G << '\n';
}

namespace {

constexpr std::size_t kImageValues = std::size_t(kImageSize) * kImageSize * kImageChannels;

void check_image_span(std::span<float> out)
{
    if (out.size() != kImageValues) {
        throw ShapeMismatch("image buffer must hold " + std::to_string(kImageValues) + " values");
    }
}

} // namespace

EncodedImages::EncodedImages(std::span<const EncodedWindow> windows) : windows_(windows)
{
    for (const EncodedWindow& w : windows_) {
        if (w.size() != std::size_t(kImageSize)) {
            throw ShapeMismatch("network input requires windows of " + std::to_string(kImageSize) +
                                " samples, got " + std::to_string(w.size()));
        }
    }
}

void EncodedImages::fill(std::size_t i, std::span<float> out) const
{
    check_image_span(out);
    windows_[i].write_image(out);
}

SeriesImages::SeriesImages(const TimeSeries& series, const WindowConfig& cfg, std::size_t count)
    : series_(series), cfg_(cfg), count_(count)
{
    if (cfg.size != std::size_t(kImageSize)) {
        throw ShapeMismatch("network input requires windows of " + std::to_string(kImageSize) +
                            " samples, got " + std::to_string(cfg.size));
    }
    if (count > window_count(series.length(), cfg)) {
        throw InvalidArgument("series has fewer windows than requested");
    }
}

void SeriesImages::fill(std::size_t i, std::span<float> out) const
{
    check_image_span(out);
    encode_window(window_view(series_, cfg_, i), i).write_image(out);
}

template <typename T>
Var<T> wasserstein_loss(const Var<T>& real, const Var<T>& fake)
{
    if (real.size() == 0 || fake.size() == 0) {
        throw EmptyBatch("critic scores are empty");
    }
    if (real.shape() != fake.shape()) {
        throw ShapeMismatch("critic score batches differ: " + shape_string(real.shape()) + " vs " +
                            shape_string(fake.shape()));
    }
    return ag::sub(ag::mean(real), ag::mean(fake));
}

template <typename T>
Var<T> gradient_penalty_at(const Mapping<T>& critic, const Tensor<T>& points, T coefficient)
{
    const Var<T> p(points, true);
    const Var<T> scores = critic(p);
    const Var<T> g = ag::grad(ag::sum(scores), {p}, true)[0];
    if (!g.value().all_finite()) {
        throw NonFiniteGradient("critic input gradient is not finite");
    }
    const Var<T> deviation = ag::add_scalar(ag::sample_norm(g), T(-1));
    return ag::scale(ag::mean(ag::square(deviation)), coefficient);
}

template <typename T>
Var<T> gradient_penalty(const Mapping<T>& critic, const Tensor<T>& real, const Tensor<T>& fake,
                        std::mt19937_64& rng, T coefficient)
{
    if (real.shape() != fake.shape()) {
        throw ShapeMismatch("penalty batches differ: " + shape_string(real.shape()) + " vs " +
                            shape_string(fake.shape()));
    }
    if (real.empty()) {
        throw EmptyBatch("penalty batch is empty");
    }
    const std::size_t batch = std::size_t(real.dim(0));
    const std::size_t per = real.size() / batch;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Tensor<T> points(real.shape());
    for (std::size_t b = 0; b < batch; ++b) {
        const T alpha = T(unit(rng));
        for (std::size_t i = b * per; i < (b + 1) * per; ++i) {
            points[i] = alpha * real[i] + (T(1) - alpha) * fake[i];
        }
    }
    return gradient_penalty_at(critic, points, coefficient);
}

template <typename T>
Var<T> mean_l2_distance(const Var<T>& a, const Var<T>& b)
{
    if (a.shape() != b.shape()) {
        throw ShapeMismatch("cycle terms differ: " + shape_string(a.shape()) + " vs " +
                            shape_string(b.shape()));
    }
    return ag::mean(ag::sample_norm(ag::sub(a, b)));
}

template <typename T>
Var<T> cycle_loss_E(const Var<T>& x, const Var<T>& z, const Mapping<T>& encode, const Mapping<T>& decode)
{
    return ag::add(mean_l2_distance(x, decode(encode(x))), mean_l2_distance(z, encode(decode(z))));
}

template <typename T>
Var<T> cycle_loss_G(const Var<T>& x, const Mapping<T>& encode, const Mapping<T>& decode)
{
    return mean_l2_distance(x, decode(encode(x)));
}

#define TSIGAN_INSTANTIATE_LOSSES(T)                                                               \
    template Var<T> wasserstein_loss(const Var<T>&, const Var<T>&);                               \
    template Var<T> gradient_penalty_at(const Mapping<T>&, const Tensor<T>&, T);                  \
    template Var<T> gradient_penalty(const Mapping<T>&, const Tensor<T>&, const Tensor<T>&,       \
                                     std::mt19937_64&, T);                                        \
    template Var<T> mean_l2_distance(const Var<T>&, const Var<T>&);                               \
    template Var<T> cycle_loss_E(const Var<T>&, const Var<T>&, const Mapping<T>&,                 \
                                 const Mapping<T>&);                                              \
    template Var<T> cycle_loss_G(const Var<T>&, const Mapping<T>&, const Mapping<T>&);

TSIGAN_INSTANTIATE_LOSSES(float)
TSIGAN_INSTANTIATE_LOSSES(double)
#undef TSIGAN_INSTANTIATE_LOSSES

RmsProp::RmsProp(std::vector<Parameter<float>> params, const TrainConfig& cfg)
    : params_(std::move(params)),
      lr_(float(cfg.learning_rate)),
      weight_decay_(float(cfg.weight_decay)),
      decay_(float(cfg.rmsprop_decay)),
      epsilon_(float(cfg.rmsprop_epsilon))
{
    square_avg_.reserve(params_.size());
    for (const auto& p : params_) {
        square_avg_.emplace_back(p.var.size(), 0.0f);
    }
}

void RmsProp::step(const std::vector<Var<float>>& grads)
{
    if (grads.size() != params_.size()) {
        throw InvalidArgument("optimizer received " + std::to_string(grads.size()) +
                              " gradients for " + std::to_string(params_.size()) + " parameters");
    }
    for (std::size_t k = 0; k < params_.size(); ++k) {
        if (!grads[k].value().all_finite()) {
            throw NonFiniteGradient("gradient of '" + params_[k].name + "' is not finite");
        }
    }
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Tensor<float>& w = params_[k].var.mutable_value();
        const Tensor<float>& g = grads[k].value();
        std::vector<float>& v = square_avg_[k];
        const float wd = params_[k].decays ? weight_decay_ : 0.0f;
        for (std::size_t i = 0; i < w.size(); ++i) {
            const float gi = g[i] + wd * w[i];
            v[i] = decay_ * v[i] + (1.0f - decay_) * gi * gi;
            w[i] -= lr_ * gi / (std::sqrt(v[i]) + epsilon_);
        }
    }
}

namespace {

std::vector<Parameter<float>> concat(std::vector<Parameter<float>> a, const std::vector<Parameter<float>>& b)
{
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

std::vector<Var<float>> vars(const RmsProp& opt)
{
    std::vector<Var<float>> out;
    out.reserve(opt.parameters().size());
    for (const auto& p : opt.parameters()) {
        out.push_back(p.var);
    }
    return out;
}

// Distinct stream for sampling so that the initialisation draws stay independent.
constexpr std::uint64_t kSamplingStream = 0x9e3779b97f4a7c15ULL;

ModelParams checked_model(ModelParams m, const TrainConfig& cfg)
{
    cfg.validate();
    if (m.z_dim != cfg.z_dim) {
        throw InvalidArgument("model latent size " + std::to_string(m.z_dim) +
                              " differs from configured " + std::to_string(cfg.z_dim));
    }
    return m;
}

} // namespace

Trainer::Trainer(const TrainConfig& cfg) : Trainer(make_model<float>(cfg.z_dim, cfg.seed), cfg) {}

Trainer::Trainer(ModelParams initial, const TrainConfig& cfg)
    : cfg_(cfg),
      model_(checked_model(std::move(initial), cfg)),
      critic_opt_(concat(model_.critic_x.parameters(), model_.critic_z.parameters()), cfg),
      generator_opt_(concat(model_.encoder.parameters(), model_.decoder.parameters()), cfg),
      rng_(cfg.seed ^ kSamplingStream)
{
}

Tensor<float> Trainer::draw_batch(const ImageSource& data)
{
    if (data.count() == 0) {
        throw InvalidArgument("no training windows");
    }
    Tensor<float> batch({cfg_.batch_size, kImageSize, kImageSize, kImageChannels});
    std::uniform_int_distribution<std::size_t> pick(0, data.count() - 1);
    for (int b = 0; b < cfg_.batch_size; ++b) {
        data.fill(pick(rng_), std::span<float>(batch.data() + std::size_t(b) * kImageValues, kImageValues));
    }
    return batch;
}

Tensor<float> Trainer::draw_latent(int batch)
{
    std::normal_distribution<float> normal(0.0f, 1.0f);
    Tensor<float> z({batch, 1, 1, cfg_.z_dim});
    for (float& v : z.values()) {
        v = normal(rng_);
    }
    return z;
}

void Trainer::critic_update(const Tensor<float>& images, IterationLog& log)
{
    const int batch = images.dim(0);
    const Var<float> x(images);
    const Var<float> z(draw_latent(batch));
    Var<float> fake;
    Var<float> encoded;
    {
        ag::NoGradGuard no_grad;
        fake = model_.decoder.forward(z, Mode::train);
        encoded = model_.encoder.forward(x, Mode::train);
    }
    const ModelParams& m = model_;
    const Var<float> lx = wasserstein_loss_x(critic_x_forward(m, x), critic_x_forward(m, fake));
    const Var<float> lz = wasserstein_loss_z(critic_z_forward(m, z), critic_z_forward(m, encoded));
    log.loss_cx = lx.item();
    log.loss_cz = lz.item();
    if (!std::isfinite(log.loss_cx) || !std::isfinite(log.loss_cz)) {
        throw NonFiniteLoss(std::size_t(iteration_), "critic Wasserstein estimate");
    }
    // The critics ascend their Wasserstein estimates.
    Var<float> loss = ag::scale(ag::add(lx, lz), -1.0f);

    if (cfg_.lipschitz == LipschitzMode::gradient_penalty) {
        const float coeff = float(cfg_.gp_coefficient);
        const Var<float> gpx = gradient_penalty<float>(
            [&m](const Var<float>& v) { return critic_x_forward(m, v); }, images, fake.value(), rng_, coeff);
        const Var<float> gpz = gradient_penalty<float>(
            [&m](const Var<float>& v) { return critic_z_forward(m, v); }, z.value(), encoded.value(),
            rng_, coeff);
        loss = ag::add(loss, ag::add(gpx, gpz));
        log.loss_gp_x = gpx.item();
        log.loss_gp_z = gpz.item();
    }
    if (!std::isfinite(loss.item())) {
        throw NonFiniteLoss(std::size_t(iteration_), "critic objective");
    }

    critic_opt_.step(ag::grad(loss, vars(critic_opt_)));
    if (cfg_.lipschitz == LipschitzMode::weight_clipping) {
        const float c = float(cfg_.clip_value);
        for (Var<float> v : vars(critic_opt_)) {
            for (float& w : v.mutable_value().values()) {
                w = std::clamp(w, -c, c);
            }
        }
    }
}

void Trainer::generator_update(const Tensor<float>& images, IterationLog& log)
{
    const int batch = images.dim(0);
    const Var<float> x(images);
    const Var<float> z(draw_latent(batch));

    // Running statistics follow the real-data path only.
    const Var<float> encoded = model_.encoder.forward(x, Mode::train_update);
    const Var<float> reconstructed = model_.decoder.forward(encoded, Mode::train_update);
    const Var<float> fake = model_.decoder.forward(z, Mode::train);
    const Var<float> latent_cycle = model_.encoder.forward(fake, Mode::train);

    const Var<float> forward_term = mean_l2_distance(x, reconstructed);
    const Var<float> cycle_e = ag::add(forward_term, mean_l2_distance(z, latent_cycle));
    const Var<float> cycle_g = forward_term;
    const Var<float> adversarial = ag::scale(
        ag::add(ag::mean(critic_x_forward(model_, fake)), ag::mean(critic_z_forward(model_, encoded))),
        -1.0f);
    const Var<float> loss = ag::add(adversarial, ag::add(cycle_e, cycle_g));

    log.cycle_E = cycle_e.item();
    log.cycle_G = cycle_g.item();
    if (!std::isfinite(loss.item())) {
        throw NonFiniteLoss(std::size_t(iteration_), "encoder/decoder objective");
    }
    generator_opt_.step(ag::grad(loss, vars(generator_opt_)));
}

IterationLog Trainer::run(const std::function<Tensor<float>()>& next_batch)
{
    IterationLog log;
    log.iteration = iteration_;
    for (int k = 0; k < cfg_.critic_steps; ++k) {
        critic_update(next_batch(), log);
    }
    generator_update(next_batch(), log);
    ++iteration_;
    return log;
}

IterationLog Trainer::step(const ImageSource& data)
{
    return run([&] { return draw_batch(data); });
}

IterationLog Trainer::step(const Tensor<float>& fixed_batch)
{
    if (fixed_batch.rank() != 4 || fixed_batch.dim(1) != kImageSize || fixed_batch.dim(2) != kImageSize ||
        fixed_batch.dim(3) != kImageChannels) {
        throw ShapeMismatch("training batch must be [B x 64 x 64 x 2], got " +
                            shape_string(fixed_batch.shape()));
    }
    return run([&] { return fixed_batch; });
}

ModelParams train(const ImageSource& data, const TrainConfig& cfg, const TrainObserver& observe)
{
    cfg.validate();
    if (data.count() == 0) {
        throw InvalidArgument("no training windows");
    }
    Trainer trainer(cfg);
    for (int i = 0; i < cfg.iterations; ++i) {
        const IterationLog log = trainer.step(data);
        if (observe) {
            observe(log);
        }
    }
    return trainer.model();
}

ModelParams train(std::span<const EncodedWindow> windows, const TrainConfig& cfg, const TrainObserver& observe)
{
    return train(EncodedImages(windows), cfg, observe);
}

} // namespace tsigan
