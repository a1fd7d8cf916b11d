#pragma once

#include "tsigan/evaluation.hpp"
#include "tsigan/network.hpp"
#include "tsigan/scoring.hpp"
#include "tsigan/series.hpp"
#include "tsigan/training.hpp"

#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tsigan {

struct RunConfig {
    WindowConfig window;
    TrainConfig train;
    ScoringConfig scoring;
    std::filesystem::path output;

    /// Also requires the window size the networks were built for.
    void validate() const;
};

/// Windows available for training: those lying inside [1, train_end] when the series
/// has a training prefix, otherwise all of them. Throws SeriesTooShort when none fit.
std::size_t training_window_count(const TimeSeries& series, const WindowConfig& cfg);

ModelParams fit(const TimeSeries& series, const RunConfig& cfg, const TrainObserver& observe = {});

/// Reconstruction errors of every window followed by post-processing.
Detection detect(const ModelParams& model, const TimeSeries& series, const WindowConfig& windows,
                 const ScoringConfig& cfg);

// Subcommands. Each throws an Error on failure and reports progress on `log`.

/// Writes window_<k>_gaf.txt and window_<k>_rp.txt for one window or for all of them.
void run_encode(const std::filesystem::path& input, const WindowConfig& cfg,
                const std::filesystem::path& out_dir, std::optional<std::size_t> window,
                std::ostream& log);

/// Writes the checkpoint and a training-loss CSV next to it (`<checkpoint>.log.csv`).
ModelParams run_train(const std::filesystem::path& input, const RunConfig& cfg,
                      const std::filesystem::path& checkpoint, std::ostream& log);

/// Writes scores.csv and detections.csv into cfg.output. Window geometry comes from the
/// checkpoint.
Detection run_detect(const std::filesystem::path& checkpoint, const std::filesystem::path& input,
                     const RunConfig& cfg, std::ostream& log);

struct EvalRequest {
    std::filesystem::path predictions;
    std::vector<AnomalyInterval> truth; ///< used when non-empty
    std::optional<std::filesystem::path> series; ///< otherwise truth comes from this file
    std::string dataset;
    std::optional<std::filesystem::path> report;
};

/// Prints the report CSV to `out` and, when requested, writes it to a file.
MatchCounts run_eval(const EvalRequest& request, std::ostream& out);

struct BenchResult {
    std::size_t train_windows = 0;
    std::size_t iterations = 0;
    double train_seconds = 0.0;
    std::size_t inference_windows = 0;
    double inference_seconds = 0.0;
};

inline constexpr double kReferenceInferenceSeconds = 0.002;

/// Times cfg.train.iterations training steps and one forward pass over every window.
BenchResult run_bench(const std::filesystem::path& input, const RunConfig& cfg, std::ostream& out);
void write_bench_table(std::ostream& out, const BenchResult& r);

/// 0 ok, 1 usage, 2 data, 3 numeric.
int exit_code(const std::exception& e) noexcept;

} // namespace tsigan
