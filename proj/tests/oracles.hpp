#pragma once

// Brute-force references shared by the unit tests and the acceptance runner.

#include "tsigan/evaluation.hpp"
#include "tsigan/scoring.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <utility>
#include <vector>

namespace tsigan::testing {

// Dense reference: D is the (N-2) x N second-difference operator.
inline Eigen::MatrixXd second_difference(std::size_t n)
{
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(Eigen::Index(n - 2), Eigen::Index(n));
    for (Eigen::Index j = 0; j + 2 < Eigen::Index(n); ++j) {
        d(j, j) = 1.0;
        d(j, j + 1) = -2.0;
        d(j, j + 2) = 1.0;
    }
    return d;
}

inline Eigen::VectorXd as_vector(const std::vector<double>& v)
{
    return Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(v.size()));
}

inline std::vector<double> dense_hp(const std::vector<double>& eps, double lambda)
{
    const Eigen::MatrixXd d = second_difference(eps.size());
    const Eigen::MatrixXd a =
        Eigen::MatrixXd::Identity(Eigen::Index(eps.size()), Eigen::Index(eps.size())) + lambda * d.transpose() * d;
    const Eigen::VectorXd r = a.partialPivLu().solve(as_vector(eps));
    return {r.data(), r.data() + r.size()};
}

inline double hp_objective(const std::vector<double>& eps, const std::vector<double>& r, double lambda)
{
    double fit = 0.0;
    double smooth = 0.0;
    for (std::size_t k = 0; k < eps.size(); ++k) {
        fit += (eps[k] - r[k]) * (eps[k] - r[k]);
    }
    for (std::size_t k = 1; k + 1 < r.size(); ++k) {
        const double c = (r[k + 1] - r[k]) - (r[k] - r[k - 1]);
        smooth += c * c;
    }
    return fit + lambda * smooth;
}

inline double max_abs(const std::vector<double>& v)
{
    double m = 0.0;
    for (double x : v) {
        m = std::max(m, std::abs(x));
    }
    return m;
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double lo = 0.0, double hi = 10.0)
{
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (double& x : v) {
        x = u(rng);
    }
    return v;
}

// Small-integer vectors produce many ties and plateaus.
inline std::vector<double> random_levels(std::size_t n, std::mt19937_64& rng)
{
    std::uniform_int_distribution<int> u(0, 4);
    std::vector<double> v(n);
    for (double& x : v) {
        x = u(rng);
    }
    return v;
}

// Scan-based peak oracle: a point is a peak iff it starts a run of equal values whose
// both neighbours exist and are strictly lower.
inline std::vector<Peak> reference_peaks(const std::vector<double>& v)
{
    std::vector<Peak> out;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
        if (v[i - 1] == v[i]) {
            continue;
        }
        std::size_t end = i;
        while (end + 1 < v.size() && v[end + 1] == v[i]) {
            ++end;
        }
        if (end + 1 < v.size() && v[i - 1] < v[i] && v[end + 1] < v[i]) {
            out.push_back({i, v[i]});
        }
    }
    std::sort(out.begin(), out.end(), [](const Peak& a, const Peak& b) {
        return a.value != b.value ? a.value > b.value : a.index < b.index;
    });
    return out;
}

struct ReferenceResult {
    double sigma_gaf;
    double sigma_rp;
    std::vector<double> scores;
    std::set<std::pair<std::size_t, std::size_t>> detected;
    std::set<std::pair<std::size_t, std::size_t>> retained;
};

inline double reference_sigma(const std::vector<double>& smoothed)
{
    const auto p = reference_peaks(smoothed);
    if (p.empty()) {
        return 1.0;
    }
    if (p.size() == 1) {
        return 2.0;
    }
    if (p[0].value <= 0.0) {
        return 1.0;
    }
    return std::min(2.0, std::max(1.0, (p[0].value - p[1].value) / p[0].value + 1.0));
}

// Post-processing written out directly from its textual definition, with smoothing done.
inline ReferenceResult reference_post_process(const std::vector<double>& g, const std::vector<double>& r, double theta)
{
    ReferenceResult out;
    out.sigma_gaf = reference_sigma(g);
    out.sigma_rp = reference_sigma(r);
    const std::size_t n = g.size();
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        out.scores.push_back(out.sigma_gaf * g[k] + out.sigma_rp * r[k]);
        total += out.scores.back();
    }
    const double mean = total / double(n);

    std::vector<std::pair<double, std::pair<std::size_t, std::size_t>>> seqs;
    std::size_t k = 0;
    while (k < n) {
        if (!(out.scores[k] > mean)) {
            ++k;
            continue;
        }
        std::size_t e = k;
        double m = out.scores[k];
        while (e + 1 < n && out.scores[e + 1] > mean) {
            ++e;
            m = std::max(m, out.scores[e]);
        }
        seqs.push_back({m, {k + 1, e + 1}});
        out.detected.insert({k + 1, e + 1});
        k = e + 1;
    }
    std::stable_sort(seqs.begin(), seqs.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::size_t keep = seqs.size();
    for (std::size_t i = 1; i < seqs.size(); ++i) {
        const double prev = seqs[i - 1].first;
        const double p = prev > 0.0 ? (prev - seqs[i].first) / prev : 0.0;
        if (p < theta) {
            keep = i;
            break;
        }
    }
    for (std::size_t i = 0; i < keep; ++i) {
        out.retained.insert(seqs[i].second);
    }
    return out;
}

// Sample-level brute force: two intervals overlap iff some sample lies in both.
inline MatchCounts brute_match(const std::vector<AnomalyInterval>& truth,
                               const std::vector<AnomalyInterval>& preds)
{
    auto share_sample = [](const AnomalyInterval& a, const AnomalyInterval& b) {
        for (std::size_t t = a.begin; t <= a.end; ++t) {
            if (t >= b.begin && t <= b.end) {
                return true;
            }
        }
        return false;
    };
    MatchCounts c;
    for (const auto& t : truth) {
        bool hit = false;
        for (const auto& p : preds) {
            hit = hit || share_sample(t, p);
        }
        ++(hit ? c.tp : c.fn);
    }
    for (const auto& p : preds) {
        bool hit = false;
        for (const auto& t : truth) {
            hit = hit || share_sample(p, t);
        }
        c.fp += hit ? 0 : 1;
    }
    return c;
}

} // namespace tsigan::testing
