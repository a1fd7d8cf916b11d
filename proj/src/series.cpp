#include "tsigan/series.hpp"

#include "tsigan/error.hpp"

#include <algorithm>
#include <cmath>

namespace tsigan {

void TimeSeries::validate() const
{
    if (values.empty()) {
        throw InvalidArgument("time series '" + name + "' is empty");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw InvalidArgument("time series '" + name + "' has a non-finite value at sample " +
                                  std::to_string(i + 1));
        }
    }
    if (truth && (truth->begin < 1 || truth->begin > truth->end || truth->end > values.size())) {
        throw InvalidArgument("anomaly interval [" + std::to_string(truth->begin) + ", " +
                              std::to_string(truth->end) + "] is outside [1, " +
                              std::to_string(values.size()) + "]");
    }
    if (train_end && (*train_end < 1 || *train_end > values.size())) {
        throw InvalidArgument("train_end " + std::to_string(*train_end) + " is outside the series");
    }
}

void WindowConfig::validate() const
{
    if (size < 2) {
        throw InvalidArgument("window size must be at least 2");
    }
    if (step < 1) {
        throw InvalidArgument("step size must be at least 1");
    }
}

std::size_t window_count(std::size_t length, const WindowConfig& cfg)
{
    cfg.validate();
    if (length <= cfg.size) {
        throw SeriesTooShort("series of length " + std::to_string(length) +
                             " is too short for windows of size " + std::to_string(cfg.size));
    }
    return (length - cfg.size) / cfg.step;
}

std::span<const double> window_view(const TimeSeries& series, const WindowConfig& cfg,
                                    std::size_t k)
{
    const std::size_t offset = k * cfg.step;
    if (offset + cfg.size > series.values.size()) {
        throw InvalidArgument("window " + std::to_string(k) + " runs past the end of the series");
    }
    return std::span<const double>(series.values).subspan(offset, cfg.size);
}

std::vector<Window> sliding_windows(const TimeSeries& series, const WindowConfig& cfg)
{
    const std::size_t n = window_count(series.length(), cfg);
    std::vector<Window> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        auto view = window_view(series, cfg, k);
        out.push_back(Window{k, window_start(k, cfg), {view.begin(), view.end()}});
    }
    return out;
}

std::size_t windows_within(std::size_t last_sample, std::size_t total_windows,
                           const WindowConfig& cfg) noexcept
{
    if (last_sample < cfg.size) {
        return 0;
    }
    return std::min(total_windows, (last_sample - cfg.size) / cfg.step + 1);
}

std::vector<double> rescale_window(std::span<const double> window)
{
    std::vector<double> out(window.size(), 0.0);
    if (window.empty()) {
        return out;
    }
    const auto [lo_it, hi_it] = std::minmax_element(window.begin(), window.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (hi == lo) {
        return out;
    }
    for (std::size_t i = 0; i < window.size(); ++i) {
        out[i] = ((window[i] - hi) + (window[i] - lo)) / (hi - lo);
    }
    return out;
}

} // namespace tsigan
