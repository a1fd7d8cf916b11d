#include "tsigan/encoding.hpp"

#include "tsigan/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

namespace tsigan {

ChannelMatrix gaf_encode(std::span<const double> rescaled)
{
    const std::size_t w = rescaled.size();
    std::vector<double> x(w);
    std::vector<double> s(w);
    for (std::size_t i = 0; i < w; ++i) {
        x[i] = std::clamp(rescaled[i], -1.0, 1.0);
        s[i] = std::sqrt(1.0 - x[i] * x[i]);
    }

    ChannelMatrix m{w, ChannelKind::gaf, std::vector<double>(w * w)};
    for (std::size_t a = 0; a < w; ++a) {
        for (std::size_t b = a; b < w; ++b) {
            const double v = std::clamp(x[a] * x[b] - s[a] * s[b], -1.0, 1.0);
            m.at(a, b) = v;
            m.at(b, a) = v;
        }
    }
    return m;
}

ChannelMatrix rp_encode(std::span<const double> window)
{
    const std::size_t w = window.size();
    ChannelMatrix m{w, ChannelKind::rp, std::vector<double>(w * w, 0.0)};
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t a = 0; a < w; ++a) {
        for (std::size_t b = 0; b < w; ++b) {
            const double d = std::abs(window[a] - window[b]);
            m.at(a, b) = d;
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
    }
    if (w == 0 || hi == lo) {
        std::fill(m.entries.begin(), m.entries.end(), 0.0);
        return m;
    }
    for (double& v : m.entries) {
        v = 2.0 * (v - lo) / (hi - lo) - 1.0;
    }
    return m;
}

EncodedWindow encode_window(std::span<const double> window, std::size_t index)
{
    return EncodedWindow{index, gaf_encode(rescale_window(window)), rp_encode(window)};
}

std::vector<EncodedWindow> encode_series(const TimeSeries& series, const WindowConfig& cfg)
{
    const std::size_t n = window_count(series.length(), cfg);
    std::vector<EncodedWindow> out(n);
    parallel_for(n, [&](std::size_t k) { out[k] = encode_window(window_view(series, cfg, k), k); });
    return out;
}

void write_matrix(std::ostream& out, const ChannelMatrix& m)
{
    const auto flags = out.flags();
    const auto precision = out.precision();
    out << std::setprecision(17);
    for (std::size_t a = 0; a < m.size; ++a) {
        for (std::size_t b = 0; b < m.size; ++b) {
            if (b != 0) {
                out << ' ';
            }
            out << m.at(a, b);
        }
        out << '\n';
    }
    out.flags(flags);
    out.precision(precision);
}

} // namespace tsigan
