#pragma once

#include "tsigan/network.hpp"
#include "tsigan/series.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace tsigan {

class ImageSource;
struct EncodedWindow;

/// Per-window reconstruction errors, one entry per window and channel.
struct ChannelErrors {
    std::vector<double> gaf;
    std::vector<double> rp;

    std::size_t size() const noexcept { return gaf.size(); }
};

/// Per-sample, per-channel sums of squared differences of two [B, H, W, 2] batches.
ChannelErrors image_errors(const Tensor<float>& images, const Tensor<float>& reconstructions);

/// Sum of squared differences between each image and G(E(image)), split by channel.
/// Windows are processed in fixed chunks, so the result does not depend on the thread count.
ChannelErrors reconstruction_errors(const ModelParams& model, const ImageSource& images);
ChannelErrors reconstruction_errors(const ModelParams& model, std::span<const EncodedWindow> windows);

/// Hodrick-Prescott trend: argmin_r |eps - r|^2 + lambda |D r|^2 with D the second-difference
/// operator, i.e. the solution of (I + lambda D'D) r = eps, by a banded LDL' factorisation.
/// Inputs shorter than 3 are returned unchanged. Throws InvalidArgument for negative lambda.
std::vector<double> hp_filter(std::span<const double> eps, double lambda);

struct Peak {
    std::size_t index = 0; ///< 0-based
    double value = 0.0;
    friend bool operator==(const Peak&, const Peak&) = default;
};

/// Strict interior local maxima, highest first (ties keep time order). A plateau that
/// rises above both shoulders counts once, at its first index.
std::vector<Peak> find_peaks(std::span<const double> values);

/// (p0 - p1) / p0 + 1 for the two highest peaks, clamped to [1, 2]; 2 for a single
/// peak and 1 without peaks or when p0 <= 0.
double channel_confidence(std::span<const Peak> sorted_peaks);

struct ScoreVector {
    std::vector<double> scores;
    double sigma_gaf = 1.0;
    double sigma_rp = 1.0;
};

/// sigma_gaf * gaf + sigma_rp * rp, elementwise. Throws ShapeMismatch.
ScoreVector fuse_scores(std::span<const double> gaf, std::span<const double> rp, double sigma_gaf,
                        double sigma_rp);

/// score > mean(scores), strictly.
std::vector<bool> threshold_flags(std::span<const double> scores);

/// Maximal runs of set flags as 1-based inclusive window ranges.
std::vector<AnomalyInterval> group_flags(const std::vector<bool>& flags);

struct ScoredSequence {
    AnomalyInterval windows; ///< 1-based window indices
    double max_score = 0.0;
};

std::vector<ScoredSequence> score_sequences(const std::vector<AnomalyInterval>& runs,
                                            std::span<const double> scores);

/// Drops every sequence from the first insufficient relative drop between consecutive
/// maxima (in descending order) onwards. The largest sequence always survives.
/// Returns the survivors in time order.
std::vector<ScoredSequence> prune(std::vector<ScoredSequence> sequences, double theta);

/// Window run [k1, k2] covers samples [(k1 - 1) S + 1, (k2 - 1) S + W].
AnomalyInterval windows_to_time(const AnomalyInterval& run, const WindowConfig& cfg);
std::vector<AnomalyInterval> windows_to_time(const std::vector<AnomalyInterval>& runs,
                                             const WindowConfig& cfg);

struct ScoringConfig {
    double hp_lambda = 1600.0;
    double prune_theta = 0.13;

    void validate() const;
};

struct Detection {
    ChannelErrors raw;
    ChannelErrors smoothed;
    ScoreVector score;
    std::vector<bool> flags;
    std::vector<ScoredSequence> detected; ///< every flagged run, time order
    std::vector<ScoredSequence> retained; ///< survivors of pruning, time order
    std::vector<AnomalyInterval> intervals; ///< retained runs in sample coordinates

    /// Retained run with the highest score maximum, in sample coordinates.
    std::optional<AnomalyInterval> top_interval(const WindowConfig& cfg) const;
};

/// Smoothing, confidence weighting, thresholding, grouping and pruning.
Detection post_process(ChannelErrors errors, const WindowConfig& windows, const ScoringConfig& cfg);

/// CSV `window_index,eps_gaf,eps_rp,smoothed_gaf,smoothed_rp,score,flag` (1-based index).
void write_scores_csv(std::ostream& out, const Detection& d);
/// CSV `begin,end` in sample coordinates.
void write_detections_csv(std::ostream& out, const std::vector<AnomalyInterval>& intervals);

} // namespace tsigan
