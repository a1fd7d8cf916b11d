#include "tsigan/pipeline.hpp"

#include "tsigan/encoding.hpp"
#include "tsigan/error.hpp"
#include "tsigan/io.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace tsigan {

namespace fs = std::filesystem;

namespace {

std::ofstream open_output(const fs::path& path)
{
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) {
        throw InvalidArgument("cannot write '" + path.string() + "'");
    }
    return out;
}

void check_written(std::ofstream& out, const fs::path& path)
{
    out.close();
    if (!out) {
        throw InvalidArgument("failed writing '" + path.string() + "'");
    }
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

void RunConfig::validate() const
{
    window.validate();
    if (window.size != std::size_t(kImageSize)) {
        throw InvalidArgument("the networks take windows of size " + std::to_string(kImageSize) +
                              ", got " + std::to_string(window.size));
    }
    train.validate();
    scoring.validate();
}

std::size_t training_window_count(const TimeSeries& series, const WindowConfig& cfg)
{
    const std::size_t total = window_count(series.length(), cfg);
    if (!series.train_end) {
        return total;
    }
    const std::size_t n = windows_within(*series.train_end, total, cfg);
    if (n == 0) {
        throw SeriesTooShort("training prefix of " + std::to_string(*series.train_end) +
                             " samples holds no complete window");
    }
    return n;
}

ModelParams fit(const TimeSeries& series, const RunConfig& cfg, const TrainObserver& observe)
{
    cfg.validate();
    series.validate();
    const SeriesImages images(series, cfg.window, training_window_count(series, cfg.window));
    return train(images, cfg.train, observe);
}

Detection detect(const ModelParams& model, const TimeSeries& series, const WindowConfig& windows,
                 const ScoringConfig& cfg)
{
    cfg.validate();
    series.validate();
    const SeriesImages images(series, windows, window_count(series.length(), windows));
    return post_process(reconstruction_errors(model, images), windows, cfg);
}

void run_encode(const fs::path& input, const WindowConfig& cfg, const fs::path& out_dir,
                std::optional<std::size_t> window, std::ostream& log)
{
    const TimeSeries series = load_series(describe(input));
    const std::size_t n = window_count(series.length(), cfg);
    if (window && *window >= n) {
        throw InvalidArgument("window " + std::to_string(*window) + " is out of range [0, " +
                              std::to_string(n) + ")");
    }
    fs::create_directories(out_dir);
    const std::size_t first = window.value_or(0);
    const std::size_t last = window ? *window + 1 : n;
    for (std::size_t k = first; k < last; ++k) {
        const EncodedWindow enc = encode_window(window_view(series, cfg, k), k);
        for (const ChannelMatrix* m : {&enc.gaf, &enc.rp}) {
            const fs::path path = out_dir / ("window_" + std::to_string(k) +
                                             (m->kind == ChannelKind::gaf ? "_gaf.txt" : "_rp.txt"));
            std::ofstream out = open_output(path);
            write_matrix(out, *m);
            check_written(out, path);
        }
    }
    log << "encoded " << last - first << " of " << n << " windows into " << out_dir.string() << '\n';
}

ModelParams run_train(const fs::path& input, const RunConfig& cfg, const fs::path& checkpoint,
                      std::ostream& log)
{
    cfg.validate();
    const TimeSeries series = load_series(describe(input));
    const fs::path log_path = checkpoint.string() + ".log.csv";
    std::ofstream losses = open_output(log_path);
    write_log_header(losses);
    const std::size_t n = training_window_count(series, cfg.window);
    log << "training on " << n << " of " << window_count(series.length(), cfg.window) << " windows, "
        << cfg.train.iterations << " iterations\n";
    const auto t0 = std::chrono::steady_clock::now();
    const ModelParams model = fit(series, cfg, [&](const IterationLog& row) { write_log_row(losses, row); });
    check_written(losses, log_path);
    save_checkpoint(checkpoint, model,
                    CheckpointMeta{std::uint32_t(cfg.window.size), std::uint32_t(cfg.window.step),
                                   cfg.train.seed});
    log << "trained in " << seconds_since(t0) << " s; wrote " << checkpoint.string() << '\n';
    return model;
}

Detection run_detect(const fs::path& checkpoint, const fs::path& input, const RunConfig& cfg,
                     std::ostream& log)
{
    CheckpointMeta meta;
    const ModelParams model = load_checkpoint(checkpoint, &meta);
    const WindowConfig windows{meta.window_size, meta.step};
    const TimeSeries series = load_series(describe(input));
    const Detection d = detect(model, series, windows, cfg.scoring);

    fs::create_directories(cfg.output);
    const fs::path scores_path = cfg.output / "scores.csv";
    std::ofstream scores = open_output(scores_path);
    write_scores_csv(scores, d);
    check_written(scores, scores_path);
    const fs::path detections_path = cfg.output / "detections.csv";
    std::ofstream detections = open_output(detections_path);
    write_detections_csv(detections, d.intervals);
    check_written(detections, detections_path);

    log << d.detected.size() << " flagged sequences, " << d.retained.size() << " retained";
    if (const auto top = d.top_interval(windows)) {
        log << "; top interval " << top->begin << ':' << top->end;
    }
    log << '\n';
    return d;
}

MatchCounts run_eval(const EvalRequest& request, std::ostream& out)
{
    std::vector<AnomalyInterval> truth = request.truth;
    if (truth.empty()) {
        if (!request.series) {
            throw InvalidArgument("eval needs --truth or a series file with a known anomaly");
        }
        const TimeSeries series = load_series(describe(*request.series));
        if (!series.truth) {
            throw InvalidArgument("'" + request.series->string() + "' carries no anomaly interval");
        }
        truth.push_back(*series.truth);
    }
    const std::vector<AnomalyInterval> preds = read_intervals_csv(request.predictions);
    const std::vector<DatasetResult> rows{{request.dataset, match(truth, preds)}};

    std::ostringstream report;
    write_report(report, rows);
    out << report.str();
    if (request.report) {
        std::ofstream file = open_output(*request.report);
        file << report.str();
        check_written(file, *request.report);
    }
    return rows.front().counts;
}

BenchResult run_bench(const fs::path& input, const RunConfig& cfg, std::ostream& out)
{
    cfg.validate();
    const TimeSeries series = load_series(describe(input));
    BenchResult r;
    r.train_windows = training_window_count(series, cfg.window);
    r.iterations = std::size_t(cfg.train.iterations);
    auto t0 = std::chrono::steady_clock::now();
    const ModelParams model = fit(series, cfg);
    r.train_seconds = seconds_since(t0);

    r.inference_windows = window_count(series.length(), cfg.window);
    const SeriesImages images(series, cfg.window, r.inference_windows);
    t0 = std::chrono::steady_clock::now();
    reconstruction_errors(model, images);
    r.inference_seconds = seconds_since(t0);
    write_bench_table(out, r);
    return r;
}

void write_bench_table(std::ostream& out, const BenchResult& r)
{
    const auto per = [](double total, std::size_t n) { return n > 0 ? total / double(n) : 0.0; };
    std::ostringstream s;
    s << std::setprecision(4);
    s << "phase,windows,iterations,total_s,per_window_s,reference_per_window_s\n";
    s << "training," << r.train_windows << ',' << r.iterations << ',' << r.train_seconds << ','
      << per(r.train_seconds, r.train_windows) << ",\n";
    s << "inference," << r.inference_windows << ",1," << r.inference_seconds << ','
      << per(r.inference_seconds, r.inference_windows) << ',' << kReferenceInferenceSeconds << '\n';
    out << s.str();
}

int exit_code(const std::exception& e) noexcept
{
    if (const auto* err = dynamic_cast<const Error*>(&e)) {
        switch (err->kind()) {
        case ErrorKind::usage:
            return 1;
        case ErrorKind::data:
            return 2;
        case ErrorKind::numeric:
            return 3;
        }
    }
    return 2;
}

} // namespace tsigan
