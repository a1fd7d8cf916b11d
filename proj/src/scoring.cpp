#include "tsigan/scoring.hpp"

#include "tsigan/parallel.hpp"
#include "tsigan/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace tsigan {

namespace {

constexpr std::size_t kChunk = 32;
constexpr std::size_t kImageValues = std::size_t(kImageSize) * kImageSize * kImageChannels;

} // namespace

ChannelErrors image_errors(const Tensor<float>& images, const Tensor<float>& reconstructions)
{
    if (images.shape() != reconstructions.shape() || images.rank() != 4 || images.dim(3) != 2) {
        throw ShapeMismatch("expected matching [B x H x W x 2] batches, got " +
                            shape_string(images.shape()) + " and " + shape_string(reconstructions.shape()));
    }
    const std::size_t batch = std::size_t(images.dim(0));
    const std::size_t per = images.size() / batch;
    ChannelErrors out{std::vector<double>(batch, 0.0), std::vector<double>(batch, 0.0)};
    for (std::size_t b = 0; b < batch; ++b) {
        const float* xi = images.data() + b * per;
        const float* ri = reconstructions.data() + b * per;
        double gaf = 0.0;
        double rp = 0.0;
        for (std::size_t i = 0; i < per; i += 2) {
            const double dg = double(xi[i]) - double(ri[i]);
            const double dr = double(xi[i + 1]) - double(ri[i + 1]);
            gaf += dg * dg;
            rp += dr * dr;
        }
        out.gaf[b] = gaf;
        out.rp[b] = rp;
    }
    return out;
}

ChannelErrors reconstruction_errors(const ModelParams& model, const ImageSource& images)
{
    const std::size_t n = images.count();
    ChannelErrors out{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    const std::size_t chunks = (n + kChunk - 1) / kChunk;
    parallel_for(chunks, [&](std::size_t c) {
        const std::size_t first = c * kChunk;
        const std::size_t count = std::min(kChunk, n - first);
        Tensor<float> batch({int(count), kImageSize, kImageSize, kImageChannels});
        for (std::size_t b = 0; b < count; ++b) {
            images.fill(first + b, std::span<float>(batch.data() + b * kImageValues, kImageValues));
        }
        ag::NoGradGuard no_grad;
        const ag::Var<float> x(batch);
        const ChannelErrors part =
            image_errors(batch, decoder_forward(model, encoder_forward(model, x)).value());
        std::copy(part.gaf.begin(), part.gaf.end(), out.gaf.begin() + std::ptrdiff_t(first));
        std::copy(part.rp.begin(), part.rp.end(), out.rp.begin() + std::ptrdiff_t(first));
    });
    return out;
}

ChannelErrors reconstruction_errors(const ModelParams& model, std::span<const EncodedWindow> windows)
{
    return reconstruction_errors(model, EncodedImages(windows));
}

std::vector<Peak> find_peaks(std::span<const double> v)
{
    std::vector<Peak> peaks;
    const std::size_t n = v.size();
    std::size_t i = 1;
    while (i + 1 < n) {
        if (v[i] > v[i - 1]) {
            // Walk over a possible plateau, then require a strict descent after it.
            std::size_t j = i;
            while (j + 1 < n && v[j + 1] == v[i]) {
                ++j;
            }
            if (j + 1 < n && v[j + 1] < v[i]) {
                peaks.push_back({i, v[i]});
            }
            i = j + 1;
        } else {
            ++i;
        }
    }
    std::stable_sort(peaks.begin(), peaks.end(),
                     [](const Peak& a, const Peak& b) { return a.value > b.value; });
    return peaks;
}

double channel_confidence(std::span<const Peak> sorted_peaks)
{
    if (sorted_peaks.empty()) {
        return 1.0;
    }
    if (sorted_peaks.size() == 1) {
        return 2.0;
    }
    const double p0 = sorted_peaks[0].value;
    const double p1 = sorted_peaks[1].value;
    if (!(p0 > 0.0)) {
        return 1.0;
    }
    return std::clamp((p0 - p1) / p0 + 1.0, 1.0, 2.0);
}

ScoreVector fuse_scores(std::span<const double> gaf, std::span<const double> rp, double sigma_gaf,
                        double sigma_rp)
{
    if (gaf.size() != rp.size()) {
        throw ShapeMismatch("channel error lengths differ: " + std::to_string(gaf.size()) + " vs " +
                            std::to_string(rp.size()));
    }
    ScoreVector s{std::vector<double>(gaf.size()), sigma_gaf, sigma_rp};
    for (std::size_t k = 0; k < gaf.size(); ++k) {
        s.scores[k] = sigma_gaf * gaf[k] + sigma_rp * rp[k];
    }
    return s;
}

std::vector<bool> threshold_flags(std::span<const double> scores)
{
    std::vector<bool> flags(scores.size(), false);
    if (scores.empty()) {
        return flags;
    }
    const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / double(scores.size());
    for (std::size_t k = 0; k < scores.size(); ++k) {
        flags[k] = scores[k] > mean;
    }
    return flags;
}

std::vector<AnomalyInterval> group_flags(const std::vector<bool>& flags)
{
    std::vector<AnomalyInterval> runs;
    for (std::size_t k = 0; k < flags.size(); ++k) {
        if (!flags[k]) {
            continue;
        }
        if (k > 0 && flags[k - 1]) {
            runs.back().end = k + 1;
        } else {
            runs.push_back({k + 1, k + 1});
        }
    }
    return runs;
}

std::vector<ScoredSequence> score_sequences(const std::vector<AnomalyInterval>& runs,
                                            std::span<const double> scores)
{
    std::vector<ScoredSequence> out;
    out.reserve(runs.size());
    for (const AnomalyInterval& r : runs) {
        if (r.begin < 1 || r.begin > r.end || r.end > scores.size()) {
            throw InvalidArgument("window run outside the score vector");
        }
        const auto first = scores.begin() + std::ptrdiff_t(r.begin - 1);
        const auto last = scores.begin() + std::ptrdiff_t(r.end);
        out.push_back({r, *std::max_element(first, last)});
    }
    return out;
}

std::vector<ScoredSequence> prune(std::vector<ScoredSequence> sequences, double theta)
{
    if (!(theta > 0.0 && theta < 1.0)) {
        throw InvalidArgument("pruning threshold must lie in (0, 1)");
    }
    std::stable_sort(sequences.begin(), sequences.end(),
                     [](const ScoredSequence& a, const ScoredSequence& b) { return a.max_score > b.max_score; });
    std::size_t keep = sequences.size();
    for (std::size_t i = 1; i < sequences.size(); ++i) {
        const double prev = sequences[i - 1].max_score;
        const double drop = prev > 0.0 ? (prev - sequences[i].max_score) / prev : 0.0;
        if (drop < theta) {
            keep = i;
            break;
        }
    }
    sequences.resize(keep);
    std::sort(sequences.begin(), sequences.end(), [](const ScoredSequence& a, const ScoredSequence& b) {
        return a.windows.begin < b.windows.begin;
    });
    return sequences;
}

AnomalyInterval windows_to_time(const AnomalyInterval& run, const WindowConfig& cfg)
{
    if (run.begin < 1 || run.begin > run.end) {
        throw InvalidArgument("window runs are 1-based and non-empty");
    }
    return {(run.begin - 1) * cfg.step + 1, (run.end - 1) * cfg.step + cfg.size};
}

std::vector<AnomalyInterval> windows_to_time(const std::vector<AnomalyInterval>& runs,
                                             const WindowConfig& cfg)
{
    std::vector<AnomalyInterval> out;
    out.reserve(runs.size());
    for (const AnomalyInterval& r : runs) {
        out.push_back(windows_to_time(r, cfg));
    }
    return out;
}

void ScoringConfig::validate() const
{
    if (!(hp_lambda >= 0.0) || !std::isfinite(hp_lambda)) {
        throw InvalidArgument("HP filter lambda must be finite and non-negative");
    }
    if (!(prune_theta > 0.0 && prune_theta < 1.0)) {
        throw InvalidArgument("pruning threshold must lie in (0, 1)");
    }
}

std::optional<AnomalyInterval> Detection::top_interval(const WindowConfig& cfg) const
{
    if (retained.empty()) {
        return std::nullopt;
    }
    const auto best = std::max_element(retained.begin(), retained.end(),
                                       [](const ScoredSequence& a, const ScoredSequence& b) {
                                           return a.max_score < b.max_score;
                                       });
    return windows_to_time(best->windows, cfg);
}

Detection post_process(ChannelErrors errors, const WindowConfig& windows, const ScoringConfig& cfg)
{
    cfg.validate();
    if (errors.gaf.size() != errors.rp.size()) {
        throw ShapeMismatch("channel error lengths differ");
    }
    Detection d;
    d.raw = std::move(errors);
    d.smoothed = {hp_filter(d.raw.gaf, cfg.hp_lambda), hp_filter(d.raw.rp, cfg.hp_lambda)};
    const double sigma_gaf = channel_confidence(find_peaks(d.smoothed.gaf));
    const double sigma_rp = channel_confidence(find_peaks(d.smoothed.rp));
    d.score = fuse_scores(d.smoothed.gaf, d.smoothed.rp, sigma_gaf, sigma_rp);
    d.flags = threshold_flags(d.score.scores);
    d.detected = score_sequences(group_flags(d.flags), d.score.scores);
    d.retained = prune(d.detected, cfg.prune_theta);
    for (const ScoredSequence& s : d.retained) {
        d.intervals.push_back(windows_to_time(s.windows, windows));
    }
    return d;
}

void write_scores_csv(std::ostream& out, const Detection& d)
{
    out << "window_index,eps_gaf,eps_rp,smoothed_gaf,smoothed_rp,score,flag\n";
    const auto precision = out.precision(17);
    for (std::size_t k = 0; k < d.score.scores.size(); ++k) {
        out << k + 1 << ',' << d.raw.gaf[k] << ',' << d.raw.rp[k] << ',' << d.smoothed.gaf[k] << ','
            << d.smoothed.rp[k] << ',' << d.score.scores[k] << ',' << (d.flags[k] ? 1 : 0) << '\n';
    }
    out.precision(precision);
}

void write_detections_csv(std::ostream& out, const std::vector<AnomalyInterval>& intervals)
{
    out << "begin,end\n";
    for (const AnomalyInterval& i : intervals) {
        out << i.begin << ',' << i.end << '\n';
    }
}

} // namespace tsigan
