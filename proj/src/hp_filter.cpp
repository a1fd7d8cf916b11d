#include "tsigan/error.hpp"
#include "tsigan/scoring.hpp"

#include <cmath>

namespace tsigan {

std::vector<double> hp_filter(std::span<const double> eps, double lambda)
{
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw InvalidArgument("HP filter lambda must be finite and non-negative");
    }
    const std::size_t n = eps.size();
    std::vector<double> r(eps.begin(), eps.end());
    if (n < 3 || lambda == 0.0) {
        return r;
    }

    // Bands of A = I + lambda D'D: a0 diagonal, a1 and a2 the first two superdiagonals.
    std::vector<double> a0(n, 1.0);
    std::vector<double> a1(n, 0.0);
    std::vector<double> a2(n, 0.0);
    for (std::size_t j = 0; j + 2 < n; ++j) {
        a0[j] += lambda;
        a0[j + 1] += 4.0 * lambda;
        a0[j + 2] += lambda;
        a1[j] -= 2.0 * lambda;
        a1[j + 1] -= 2.0 * lambda;
        a2[j] += lambda;
    }

    // A = L diag(d) L' with unit lower-triangular L of bandwidth 2.
    std::vector<double> d(n);
    std::vector<double> l1(n, 0.0); // L(i+1, i)
    std::vector<double> l2(n, 0.0); // L(i+2, i)
    for (std::size_t i = 0; i < n; ++i) {
        double di = a0[i];
        if (i >= 1) {
            di -= l1[i - 1] * l1[i - 1] * d[i - 1];
        }
        if (i >= 2) {
            di -= l2[i - 2] * l2[i - 2] * d[i - 2];
        }
        if (!(di > 0.0) || !std::isfinite(di)) {
            throw NumericalFailure("HP filter factorisation broke down at row " + std::to_string(i));
        }
        d[i] = di;
        if (i + 1 < n) {
            double off = a1[i];
            if (i >= 1) {
                off -= l2[i - 1] * l1[i - 1] * d[i - 1];
            }
            l1[i] = off / di;
        }
        if (i + 2 < n) {
            l2[i] = a2[i] / di;
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (i >= 1) {
            r[i] -= l1[i - 1] * r[i - 1];
        }
        if (i >= 2) {
            r[i] -= l2[i - 2] * r[i - 2];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        r[i] /= d[i];
    }
    for (std::size_t i = n; i-- > 0;) {
        if (i + 1 < n) {
            r[i] -= l1[i] * r[i + 1];
        }
        if (i + 2 < n) {
            r[i] -= l2[i] * r[i + 2];
        }
    }
    for (double v : r) {
        if (!std::isfinite(v)) {
            throw NumericalFailure("HP filter produced a non-finite trend");
        }
    }
    return r;
}

} // namespace tsigan
