#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tsigan {

/// Inclusive, 1-based sample range.
struct AnomalyInterval {
    std::size_t begin = 1;
    std::size_t end = 1;

    bool overlaps(const AnomalyInterval& other) const noexcept
    {
        return begin <= other.end && other.begin <= end;
    }
    friend bool operator==(const AnomalyInterval&, const AnomalyInterval&) = default;
};

struct TimeSeries {
    std::vector<double> values;
    std::string name;
    std::optional<AnomalyInterval> truth;
    /// 1-based index of the last training sample, when the source provides one.
    std::optional<std::size_t> train_end;

    std::size_t length() const noexcept { return values.size(); }

    /// Throws InvalidArgument when any invariant is broken.
    void validate() const;
};

struct WindowConfig {
    std::size_t size = 64;
    std::size_t step = 1;

    void validate() const;
};

struct Window {
    std::size_t index = 0; ///< 0-based
    std::size_t start = 1; ///< 1-based position of the first sample
    std::vector<double> values;
};

/// N = floor((T - W) / S). Throws SeriesTooShort when T <= W.
std::size_t window_count(std::size_t length, const WindowConfig& cfg);

/// 1-based first sample of window k.
inline std::size_t window_start(std::size_t k, const WindowConfig& cfg) noexcept
{
    return k * cfg.step + 1;
}

/// Samples of window k, without copying.
std::span<const double> window_view(const TimeSeries& series, const WindowConfig& cfg,
                                    std::size_t k);

std::vector<Window> sliding_windows(const TimeSeries& series, const WindowConfig& cfg);

/// Number of leading windows lying entirely inside [1, last_sample].
std::size_t windows_within(std::size_t last_sample, std::size_t total_windows,
                           const WindowConfig& cfg) noexcept;

/// Affine map of the window onto [-1, 1]; a constant window maps to all zeros.
std::vector<double> rescale_window(std::span<const double> window);

} // namespace tsigan
