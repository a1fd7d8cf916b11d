// Acceptance runner: one PASS/FAIL line per criterion. Exit status is non-zero if any fails.

#include "gradcheck.hpp"
#include "oracles.hpp"

#include "tsigan/encoding.hpp"
#include "tsigan/evaluation.hpp"
#include "tsigan/network.hpp"
#include "tsigan/pipeline.hpp"
#include "tsigan/scoring.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

using namespace tsigan;
using namespace tsigan::testing;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(const std::string& name, const std::function<Outcome()>& run)
{
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = run();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += o.pass ? 0 : 1;
    std::printf("%s %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), s);
    std::fflush(stdout);
}

double elapsed(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v)
{
    std::ostringstream s;
    s << v;
    return s.str();
}

// Encoding -------------------------------------------------------------------

Outcome encoding_suite()
{
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(1000);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.1, 10.0);
    double gaf_trig = 0.0;
    double rp_shift = 0.0;
    bool structural = true;
    const int trials = 1000;
    for (int trial = 0; trial < trials; ++trial) {
        std::vector<double> x(64);
        const double amplitude = u(rng);
        double walk = normal(rng) * 10.0;
        for (double& v : x) {
            walk += normal(rng);
            v = amplitude * walk;
        }
        const auto xr = rescale_window(x);
        const ChannelMatrix g = gaf_encode(xr);
        const ChannelMatrix r = rp_encode(x);
        const double c = u(rng) * 50.0 - 250.0;
        std::vector<double> shifted(x);
        for (double& v : shifted) {
            v += c;
        }
        const ChannelMatrix rs = rp_encode(shifted);
        for (std::size_t a = 0; a < 64; ++a) {
            const double phi_a = std::acos(std::clamp(xr[a], -1.0, 1.0));
            structural = structural && std::abs(g.at(a, a) - (2.0 * xr[a] * xr[a] - 1.0)) < 1e-12 &&
                         r.at(a, a) == -1.0;
            for (std::size_t b = 0; b < 64; ++b) {
                const double phi_b = std::acos(std::clamp(xr[b], -1.0, 1.0));
                gaf_trig = std::max(gaf_trig, std::abs(g.at(a, b) - std::cos(phi_a + phi_b)));
                rp_shift = std::max(rp_shift, std::abs(rs.at(a, b) - r.at(a, b)));
                structural = structural && g.at(a, b) == g.at(b, a) && r.at(a, b) == r.at(b, a) &&
                             std::abs(g.at(a, b)) <= 1.0 && std::abs(r.at(a, b)) <= 1.0;
            }
        }
    }
    const double seconds = elapsed(t0);
    const bool pass = structural && gaf_trig < 1e-9 && rp_shift < 1e-9 && seconds < 10.0;
    return {pass, std::to_string(trials) + " windows, symmetry/range/diagonals " +
                      (structural ? "ok" : "VIOLATED") + ", max |GAF - cos(phi_a + phi_b)| " + fmt(gaf_trig) +
                      ", max RP shift change " + fmt(rp_shift) + ", " + fmt(seconds) + " s (limit 10 s)"};
}

Outcome worked_examples()
{
    const std::vector<double> gaf_expected{1, 0, -1, 0, -1, 0, -1, 0, 1};
    const std::vector<double> rp_expected{-1, -1.0 / 3, 1, -1.0 / 3, -1, 1.0 / 3, 1, 1.0 / 3, -1};
    const ChannelMatrix g = gaf_encode(std::vector<double>{-1, 0, 1});
    const ChannelMatrix r = rp_encode(std::vector<double>{0, 1, 3});
    double worst = 0.0;
    for (std::size_t i = 0; i < 9; ++i) {
        worst = std::max({worst, std::abs(g.entries[i] - gaf_expected[i]), std::abs(r.entries[i] - rp_expected[i])});
    }
    return {worst <= 1e-12, "max deviation " + fmt(worst) + " (limit 1e-12)"};
}

// HP filter --------------------------------------------------------------------

Outcome hp_suite()
{
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(7);
    bool identity = true;
    for (std::size_t n : {1, 2, 3, 50, 1000}) {
        const auto eps = random_vector(n, rng);
        identity = identity && hp_filter(eps, 0.0) == eps;
    }

    double linear = 0.0;
    for (double lambda : {1.0, 1600.0, 1e6}) {
        for (std::size_t n : {3, 64, 1000}) {
            std::vector<double> eps(n);
            for (std::size_t k = 0; k < n; ++k) {
                eps[k] = -4.0 + 0.3 * double(k);
            }
            const auto r = hp_filter(eps, lambda);
            for (std::size_t k = 0; k < n; ++k) {
                linear = std::max(linear, std::abs(r[k] - eps[k]) / max_abs(eps));
            }
        }
    }

    double residual = 0.0;
    for (std::size_t n : {3, 10, 200, 5000}) {
        for (double lambda : {1.0, 1600.0, 1e6}) {
            const auto eps = random_vector(n, rng, -3.0, 7.0);
            const auto r = hp_filter(eps, lambda);
            std::vector<double> res(n);
            for (std::size_t k = 0; k < n; ++k) {
                res[k] = r[k] - eps[k];
            }
            for (std::size_t j = 0; j + 2 < n; ++j) {
                const double d = r[j] - 2.0 * r[j + 1] + r[j + 2];
                res[j] += lambda * d;
                res[j + 1] -= 2.0 * lambda * d;
                res[j + 2] += lambda * d;
            }
            residual = std::max(residual, max_abs(res) / max_abs(eps));
        }
    }

    double dense = 0.0;
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 3 + std::size_t(rng() % 198);
        for (double lambda : {0.5, 1.0, 100.0, 1600.0}) {
            const auto eps = random_vector(n, rng, -5.0, 5.0);
            const auto r = hp_filter(eps, lambda);
            const auto ref = dense_hp(eps, lambda);
            for (std::size_t k = 0; k < n; ++k) {
                dense = std::max(dense, std::abs(r[k] - ref[k]) / std::max(1.0, max_abs(eps)));
            }
        }
    }
    const double seconds = elapsed(t0);
    const bool pass = identity && linear < 1e-9 && residual < 1e-8 && dense < 1e-10 && seconds < 5.0;
    return {pass, std::string("lambda=0 identity ") + (identity ? "ok" : "BROKEN") + ", linear fixed point " +
                      fmt(linear) + ", normal-equation residual " + fmt(residual) + " (limit 1e-8), dense oracle " +
                      fmt(dense) + " (limit 1e-10), " + fmt(seconds) + " s (limit 5 s)"};
}

// Gradients ------------------------------------------------------------------

using Leaves = std::vector<ag::Var<double>>;

ag::Var<double> leaf(const Shape& s, std::mt19937_64& rng, double min_abs = 0.0)
{
    return ag::Var<double>(random_tensor(s, rng, -1.0, 1.0, min_abs), true);
}

ag::Var<double> probe(const ag::Var<double>& y)
{
    std::mt19937_64 rng(99);
    return ag::sum(ag::mul(y, ag::Var<double>(random_tensor(y.shape(), rng), false)));
}

Outcome gradient_checks()
{
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(11);
    double worst = 0.0;
    int checks = 0;
    auto check = [&](const std::function<ag::Var<double>(const Leaves&)>& f, Leaves leaves) {
        worst = std::max(worst, gradient_check([&f](const Leaves& v) { return probe(f(v)); }, std::move(leaves)));
        ++checks;
    };

    const Shape s{3, 2, 2, 4};
    check([](const Leaves& v) { return ag::add(v[0], v[1]); }, {leaf(s, rng), leaf(s, rng)});
    check([](const Leaves& v) { return ag::sub(v[0], v[1]); }, {leaf(s, rng), leaf(s, rng)});
    check([](const Leaves& v) { return ag::mul(v[0], v[1]); }, {leaf(s, rng), leaf(s, rng)});
    check([](const Leaves& v) { return ag::scale(v[0], 1.7); }, {leaf(s, rng)});
    check([](const Leaves& v) { return ag::add_scalar(v[0], -0.3); }, {leaf(s, rng)});
    check([](const Leaves& v) { return ag::square(v[0]); }, {leaf(s, rng)});
    check([](const Leaves& v) { return ag::relu(v[0]); }, {leaf(s, rng, 0.05)});
    check([](const Leaves& v) { return ag::leaky_relu(v[0], 0.2); }, {leaf(s, rng, 0.05)});
    check([](const Leaves& v) { return ag::tanh(v[0]); }, {leaf(s, rng)});
    const ag::Var<double> positive(random_tensor(s, rng, 0.5, 2.0), true);
    check([](const Leaves& v) { return ag::sqrt(v[0]); }, {positive});
    check([](const Leaves& v) { return ag::rsqrt(v[0]); }, {positive});
    check([](const Leaves& v) { return ag::safe_reciprocal(v[0]); }, {positive});
    check([](const Leaves& v) { return ag::sum(v[0]); }, {leaf(s, rng)});
    check([](const Leaves& v) { return ag::sum_per_sample(v[0]); }, {leaf(s, rng)});
    check([](const Leaves& v) { return ag::sum_per_channel(v[0]); }, {leaf(s, rng)});
    check([&s](const Leaves& v) { return ag::broadcast_scalar(v[0], s); }, {leaf({1}, rng)});
    check([&s](const Leaves& v) { return ag::broadcast_per_sample(v[0], s); }, {leaf({3}, rng)});
    check([&s](const Leaves& v) { return ag::broadcast_per_channel(v[0], s); }, {leaf({4}, rng)});
    check([](const Leaves& v) { return ag::reshape(v[0], Shape{6, 8}); }, {leaf(s, rng)});
    for (bool ta : {false, true}) {
        for (bool tb : {false, true}) {
            check([ta, tb](const Leaves& v) { return ag::matmul(v[0], v[1], ta, tb); },
                  {leaf(ta ? Shape{4, 3} : Shape{3, 4}, rng), leaf(tb ? Shape{5, 4} : Shape{4, 5}, rng)});
        }
    }
    const ag::Stride2d stride{2, 3};
    check([&](const Leaves& v) { return ag::conv2d(v[0], v[1], stride); },
          {leaf({2, 7, 8, 3}, rng), leaf({3, 2, 3, 4}, rng)});
    check([&](const Leaves& v) { return ag::conv_transpose2d(v[0], v[1], stride, 7, 8); },
          {leaf({2, 3, 3, 4}, rng), leaf({3, 2, 3, 4}, rng)});
    check([&](const Leaves& v) { return ag::conv2d_weight_grad(v[0], v[1], stride, 3, 2); },
          {leaf({2, 7, 8, 3}, rng), leaf({2, 3, 3, 4}, rng)});
    for (Norm norm : {Norm::batch, Norm::layer}) {
        Network<double> net("norm", Shape{3, 3, 2},
                            {LayerSpec{LayerKind::conv, 2, 2, 1, 1, 2, 3, norm, Activation::none}});
        net.initialize(rng);
        auto& p = net.layer_params()[0];
        p.gamma.mutable_value() = random_tensor({3}, rng, 0.5, 1.5);
        p.beta.mutable_value() = random_tensor({3}, rng);
        check([&net](const Leaves& v) { return net.forward(v[0], Mode::train); },
              {leaf({4, 3, 3, 2}, rng), p.weight, p.gamma, p.beta});
    }

    double adjoint = 0.0;
    for (const auto& [k, st, in] : {std::tuple{7, 3, 64}, std::tuple{5, 3, 20}, std::tuple{4, 2, 6},
                                    std::tuple{4, 2, 44}, std::tuple{3, 2, 9}}) {
        const int out = (in - k) / st + 1;
        const Tensor<double> x = random_tensor({2, in, in, 3}, rng);
        const Tensor<double> y = random_tensor({2, out, out, 4}, rng);
        const ag::Var<double> w(random_tensor({k, k, 3, 4}, rng));
        const Tensor<double> cx = ag::conv2d(ag::Var<double>(x), w, {st, st}).value();
        const Tensor<double> ty = ag::conv_transpose2d(ag::Var<double>(y), w, {st, st}, in, in).value();
        double lhs = 0.0;
        double rhs = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            lhs += cx[i] * y[i];
        }
        for (std::size_t i = 0; i < x.size(); ++i) {
            rhs += x[i] * ty[i];
        }
        adjoint = std::max(adjoint, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
    }
    const double seconds = elapsed(t0);
    const bool pass = worst < 1e-4 && adjoint < 1e-9 && seconds < 60.0;
    return {pass, std::to_string(checks) + " primitive checks, worst relative error " + fmt(worst) +
                      " (limit 1e-4), adjoint mismatch " + fmt(adjoint) + " (limit 1e-9), " + fmt(seconds) +
                      " s (limit 60 s)"};
}

// Networks -------------------------------------------------------------------

Outcome shape_pipeline()
{
    const ModelParams m = make_model<float>(100, 1);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    bool ok = true;
    std::string seen;
    for (int batch : {1, 3, 128}) {
        ag::NoGradGuard no_grad;
        Tensor<float> images({batch, 64, 64, 2});
        for (float& v : images.values()) {
            v = u(rng);
        }
        const auto z = encoder_forward(m, ag::Var<float>(images));
        const auto xr = decoder_forward(m, z);
        ok = ok && z.shape() == Shape{batch, 1, 1, 100} && xr.shape() == Shape{batch, 64, 64, 2} &&
             critic_x_forward(m, ag::Var<float>(images)).shape() == Shape{batch} &&
             critic_z_forward(m, z).shape() == Shape{batch};
        seen += (seen.empty() ? "" : ", ") + shape_string(images.shape()) + " -> " + shape_string(z.shape()) +
                " -> " + shape_string(xr.shape());
    }
    return {ok, seen};
}

// Post-processing --------------------------------------------------------------

Outcome algorithm_oracle()
{
    bool ok = channel_confidence(std::vector<Peak>{{4, 10.0}, {9, 5.0}}) == 1.5 &&
              channel_confidence(std::vector<Peak>{{1, 7.0}, {5, 7.0}}) == 1.0 &&
              channel_confidence(std::vector<Peak>{{2, 3.0}}) == 2.0;
    std::string detail = std::string("sigma cases ") + (ok ? "ok" : "WRONG");

    const ScoreVector fused = fuse_scores(std::vector<double>{1, 2}, std::vector<double>{3, 4}, 1.5, 2.0);
    const bool fuse_ok = fused.scores == std::vector<double>{7.5, 11.0};
    const bool flags_ok = threshold_flags(std::vector<double>{1, 5, 1, 5, 5, 1}) ==
                          std::vector<bool>{false, true, false, true, true, false};
    const bool group_ok = group_flags({false, true, false, true, true, false}) ==
                          std::vector<AnomalyInterval>{{2, 2}, {4, 5}};
    auto seqs = [](std::vector<double> maxima) {
        std::vector<ScoredSequence> out;
        for (std::size_t i = 0; i < maxima.size(); ++i) {
            out.push_back({{3 * i + 1, 3 * i + 2}, maxima[i]});
        }
        return out;
    };
    const bool prune_ok = prune(seqs({10, 9.9, 5}), 0.13).size() == 1 && prune(seqs({10, 5}), 0.13).size() == 2;
    ok = ok && fuse_ok && flags_ok && group_ok && prune_ok;
    detail += std::string(", fuse ") + (fuse_ok ? "ok" : "WRONG") + ", flags " + (flags_ok ? "ok" : "WRONG") +
              ", grouping " + (group_ok ? "ok" : "WRONG") + ", pruning traces " + (prune_ok ? "ok" : "WRONG");

    std::mt19937_64 rng(17);
    int agree = 0;
    const int trials = 300;
    for (int trial = 0; trial < trials; ++trial) {
        const std::size_t n = 2 + rng() % 120;
        ChannelErrors e{trial % 3 == 0 ? random_levels(n, rng) : random_vector(n, rng),
                        trial % 3 == 0 ? random_levels(n, rng) : random_vector(n, rng)};
        const double theta = 0.01 + 0.98 * double(rng() % 1000) / 1000.0;
        const ReferenceResult ref = reference_post_process(e.gaf, e.rp, theta);
        const Detection d = post_process(e, {64, 1}, {0.0, theta});
        std::set<std::pair<std::size_t, std::size_t>> detected;
        std::set<std::pair<std::size_t, std::size_t>> retained;
        for (const auto& s : d.detected) {
            detected.insert({s.windows.begin, s.windows.end});
        }
        for (const auto& s : d.retained) {
            retained.insert({s.windows.begin, s.windows.end});
        }
        agree += d.score.sigma_gaf == ref.sigma_gaf && d.score.sigma_rp == ref.sigma_rp &&
                         d.score.scores == ref.scores && detected == ref.detected && retained == ref.retained
                     ? 1
                     : 0;
    }
    ok = ok && agree == trials;
    detail += ", brute force agrees on " + std::to_string(agree) + "/" + std::to_string(trials) + " random score vectors";
    return {ok, detail};
}

// Evaluation -------------------------------------------------------------------

Outcome evaluation_rules()
{
    using I = std::vector<AnomalyInterval>;
    const I truth{{100, 200}};
    const bool examples = match(truth, I{{150, 160}}) == MatchCounts{1, 0, 0} &&
                          match(truth, I{{300, 310}}) == MatchCounts{0, 1, 1} &&
                          match(truth, I{}) == MatchCounts{0, 0, 1};
    std::mt19937_64 rng(23);
    auto random_set = [&rng](std::size_t max_count) {
        I out(rng() % (max_count + 1));
        for (auto& i : out) {
            i.begin = 1 + rng() % 300;
            i.end = i.begin + rng() % 40;
        }
        return out;
    };
    int agree = 0;
    const int trials = 5000;
    for (int trial = 0; trial < trials; ++trial) {
        const I t = random_set(4);
        const I p = random_set(6);
        agree += match(t, p) == brute_match(t, p) ? 1 : 0;
    }
    return {examples && agree == trials, std::string("worked examples ") + (examples ? "ok" : "WRONG") +
                                             ", brute force agrees on " + std::to_string(agree) + "/" +
                                             std::to_string(trials) + " random interval sets"};
}

// End to end -------------------------------------------------------------------

const AnomalyInterval kSmokeAnomaly{1500, 1540};

TimeSeries smoke_series(std::uint64_t seed)
{
    TimeSeries s;
    s.name = "smoke";
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.05);
    s.values.resize(2000);
    for (std::size_t t = 1; t <= 2000; ++t) {
        s.values[t - 1] = std::sin(2.0 * M_PI * double(t) / 50.0) + noise(rng);
    }
    // Flat segment: the sensor sticks at its last reading.
    for (std::size_t t = kSmokeAnomaly.begin; t <= kSmokeAnomaly.end; ++t) {
        s.values[t - 1] = s.values[kSmokeAnomaly.begin - 2];
    }
    s.truth = kSmokeAnomaly;
    return s;
}

Outcome smoke(int seeds, int iterations)
{
    int hits = 0;
    std::string detail;
    for (int seed = 1; seed <= seeds; ++seed) {
        const auto t0 = std::chrono::steady_clock::now();
        const TimeSeries series = smoke_series(std::uint64_t(seed));
        RunConfig cfg;
        cfg.train.iterations = iterations;
        cfg.train.batch_size = 32;
        cfg.train.seed = std::uint64_t(seed);
        const ModelParams model = fit(series, cfg);
        const Detection d = detect(model, series, cfg.window, cfg.scoring);
        const auto top = d.top_interval(cfg.window);
        const double f1 = top ? precision_f1(match(std::vector{kSmokeAnomaly}, std::vector{*top})).f1 : 0.0;
        hits += f1 == 1.0 ? 1 : 0;
        std::string line = "seed " + std::to_string(seed) + ": top interval " +
                           (top ? std::to_string(top->begin) + ":" + std::to_string(top->end) : "none") +
                           ", F1 " + fmt(f1) + ", " + std::to_string(d.retained.size()) + " retained";
        std::printf("  %s [%.0f s]\n", line.c_str(), elapsed(t0));
        std::fflush(stdout);
        detail += (detail.empty() ? "" : "; ") + line;
    }
    const int needed = seeds - seeds / 5;
    return {hits >= needed, std::to_string(hits) + "/" + std::to_string(seeds) + " seeds overlap [1500,1540] (need " +
                                std::to_string(needed) + ", " + std::to_string(iterations) +
                                " iterations at batch 32): " + detail};
}

Outcome timing()
{
    const TimeSeries series = smoke_series(1);
    const ModelParams model = make_model<float>(100, 1);
    const WindowConfig windows;
    const std::size_t n = window_count(series.length(), windows);
    auto t0 = std::chrono::steady_clock::now();
    reconstruction_errors(model, SeriesImages(series, windows, n));
    const double per_window = elapsed(t0) / double(n);

    RunConfig cfg;
    cfg.train.iterations = 3;
    cfg.train.batch_size = 32;
    t0 = std::chrono::steady_clock::now();
    fit(series, cfg);
    const double per_iteration = elapsed(t0) / 3.0;
    return {true, "informational only: inference " + fmt(per_window) + " s/window over " + std::to_string(n) +
                      " windows (reference " + fmt(kReferenceInferenceSeconds) + " s/window), training " +
                      fmt(per_iteration) + " s/iteration at batch 32"};
}

Outcome determinism()
{
    const TimeSeries series = smoke_series(4);
    RunConfig cfg;
    cfg.train.iterations = 10;
    cfg.train.batch_size = 8;
    cfg.train.seed = 42;
    std::string outputs[2];
    ModelParams models[2];
    for (int run = 0; run < 2; ++run) {
        models[run] = fit(series, cfg);
        const Detection d = detect(models[run], series, cfg.window, cfg.scoring);
        std::ostringstream s;
        write_scores_csv(s, d);
        write_detections_csv(s, d.intervals);
        outputs[run] = s.str();
    }
    const bool same_model = identical(models[0], models[1]);
    const bool same_scores = outputs[0] == outputs[1];
    return {same_model && same_scores, std::string("two fixed-seed train+detect runs: parameters ") +
                                           (same_model ? "identical" : "DIFFER") + ", scores and detections " +
                                           (same_scores ? "identical" : "DIFFER")};
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Acceptance criteria runner"};
    bool fast_only = false;
    bool smoke_only = false;
    int seeds = 5;
    int iterations = 1000;
    app.add_flag("--fast", fast_only, "Skip the end-to-end smoke reproduction");
    app.add_flag("--smoke", smoke_only, "Run only the end-to-end smoke reproduction");
    app.add_option("--seeds", seeds, "Smoke seeds")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--smoke-iterations", iterations, "Smoke training iterations")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    if (!smoke_only) {
        criterion("encoding suite", encoding_suite);
        criterion("worked examples", worked_examples);
        criterion("HP filter suite", hp_suite);
        criterion("gradient checks", gradient_checks);
        criterion("shape pipeline", shape_pipeline);
        criterion("post-processing oracle", algorithm_oracle);
        criterion("evaluation rules", evaluation_rules);
        criterion("timing", timing);
        criterion("determinism", determinism);
    }
    if (!fast_only) {
        criterion("end-to-end smoke", [&] { return smoke(seeds, iterations); });
    }
    return failures == 0 ? 0 : 1;
}
