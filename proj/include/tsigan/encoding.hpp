#pragma once

#include "tsigan/series.hpp"

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace tsigan {

enum class ChannelKind { gaf, rp };

/// Square W x W matrix stored row-major.
struct ChannelMatrix {
    std::size_t size = 0;
    ChannelKind kind = ChannelKind::gaf;
    std::vector<double> entries;

    double& at(std::size_t row, std::size_t col) { return entries[row * size + col]; }
    double at(std::size_t row, std::size_t col) const { return entries[row * size + col]; }
};

/// Two-channel image of one window. Channel order is always (GAF, RP).
struct EncodedWindow {
    std::size_t index = 0;
    ChannelMatrix gaf;
    ChannelMatrix rp;

    std::size_t size() const noexcept { return gaf.size; }

    /// Writes the image as W x W x 2 channel-last values into out (size 2 W^2).
    template <typename Scalar>
    void write_image(std::span<Scalar> out) const
    {
        const std::size_t n = gaf.entries.size();
        for (std::size_t i = 0; i < n; ++i) {
            out[2 * i] = static_cast<Scalar>(gaf.entries[i]);
            out[2 * i + 1] = static_cast<Scalar>(rp.entries[i]);
        }
    }
};

/// Gramian angular (summation) field of a window already rescaled to [-1, 1].
/// Inputs are clamped to [-1, 1] before the square-root term.
ChannelMatrix gaf_encode(std::span<const double> rescaled);

/// Pairwise absolute distances of the raw window, affinely mapped onto [-1, 1]
/// using the min and max of the whole matrix. A constant window gives all zeros.
ChannelMatrix rp_encode(std::span<const double> window);

/// GAF of the rescaled window stacked with RP of the raw window.
EncodedWindow encode_window(std::span<const double> window, std::size_t index);

std::vector<EncodedWindow> encode_series(const TimeSeries& series, const WindowConfig& cfg);

/// Plain-text matrix: one row per line, space-separated decimals.
void write_matrix(std::ostream& out, const ChannelMatrix& m);

} // namespace tsigan
