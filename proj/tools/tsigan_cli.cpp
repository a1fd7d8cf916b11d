#include "tsigan/error.hpp"
#include "tsigan/io.hpp"
#include "tsigan/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>

namespace {

using namespace tsigan;

void add_window_options(CLI::App& cmd, WindowConfig& w)
{
    cmd.add_option("--window", w.size, "Window size W")->capture_default_str();
    cmd.add_option("--step", w.step, "Window step S")->capture_default_str()->check(CLI::PositiveNumber);
}

void add_train_options(CLI::App& cmd, TrainConfig& t)
{
    cmd.add_option("--iterations", t.iterations, "Generator iterations")->capture_default_str();
    cmd.add_option("--batch", t.batch_size, "Batch size")->capture_default_str();
    cmd.add_option("--lr", t.learning_rate, "RMSProp learning rate")->capture_default_str();
    cmd.add_option("--weight-decay", t.weight_decay, "L2 weight decay on kernels")->capture_default_str();
    cmd.add_option("--z-dim", t.z_dim, "Latent size")->capture_default_str();
    cmd.add_option("--critic-steps", t.critic_steps, "Critic updates per generator update")
        ->capture_default_str();
    cmd.add_option("--gp", t.gp_coefficient, "Gradient-penalty coefficient")->capture_default_str();
    cmd.add_option("--lipschitz", t.lipschitz, "Critic constraint: gp or clip")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, LipschitzMode>{{"gp", LipschitzMode::gradient_penalty},
                                                 {"clip", LipschitzMode::weight_clipping}}));
    cmd.add_option("--clip", t.clip_value, "Weight-clipping bound")->capture_default_str();
    cmd.add_option("--seed", t.seed, "Random seed")->capture_default_str();
}

void add_scoring_options(CLI::App& cmd, ScoringConfig& s)
{
    cmd.add_option("--hp-lambda", s.hp_lambda, "Hodrick-Prescott smoothing weight")->capture_default_str();
    cmd.add_option("--prune-theta", s.prune_theta, "Minimum relative drop between retained sequences")
        ->capture_default_str();
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Time-series anomaly detection with image encodings and a cycle-consistent WGAN"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string input;
    std::string model;
    std::string out;

    auto* encode = app.add_subcommand("encode", "Write GAF and RP matrices of the sliding windows");
    std::optional<std::size_t> only_window;
    encode->add_option("--input", input, "Series file (.txt or .csv)")->required();
    encode->add_option("--index", only_window, "Single 0-based window to export");
    encode->add_option("--out", out, "Output directory")->required();
    add_window_options(*encode, cfg.window);

    auto* train = app.add_subcommand("train", "Train the model and write a checkpoint");
    train->add_option("--input", input, "Series file (.txt or .csv)")->required();
    train->add_option("--out", out, "Checkpoint path")->required();
    add_window_options(*train, cfg.window);
    add_train_options(*train, cfg.train);

    auto* detect = app.add_subcommand("detect", "Score a series and write detections");
    detect->add_option("--model", model, "Checkpoint path")->required();
    detect->add_option("--input", input, "Series file (.txt or .csv)")->required();
    detect->add_option("--out", out, "Output directory")->required();
    add_scoring_options(*detect, cfg.scoring);

    auto* eval = app.add_subcommand("eval", "Match detections against the known anomalies");
    EvalRequest request;
    std::vector<std::string> truth;
    std::string pred;
    std::string series;
    std::string report;
    eval->add_option("--pred", pred, "detections.csv")->required();
    eval->add_option("--truth", truth, "Anomaly interval begin:end (repeatable)");
    eval->add_option("--input", series, "Series file providing the anomaly interval");
    eval->add_option("--name", request.dataset, "Dataset name in the report");
    eval->add_option("--out", report, "Report CSV path");

    auto* bench = app.add_subcommand("bench", "Report per-window training and inference time");
    bench->add_option("--input", input, "Series file (.txt or .csv)")->required();
    add_window_options(*bench, cfg.window);
    cfg.train.iterations = 20;
    add_train_options(*bench, cfg.train);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    // Bad option values are usage errors, whatever the library calls them.
    try {
        if (*encode) {
            cfg.window.validate();
        } else if (*train || *bench) {
            cfg.validate();
        } else if (*detect) {
            cfg.scoring.validate();
        } else if (*eval) {
            for (const std::string& t : truth) {
                request.truth.push_back(parse_interval(t));
            }
        }
    } catch (const Error& e) {
        std::cerr << "tsigan: " << e.what() << '\n';
        return 1;
    }

    try {
        if (*encode) {
            run_encode(input, cfg.window, out, only_window, std::cerr);
        } else if (*train) {
            run_train(input, cfg, out, std::cerr);
        } else if (*detect) {
            cfg.output = out;
            run_detect(model, input, cfg, std::cerr);
        } else if (*eval) {
            request.predictions = pred;
            if (!series.empty()) {
                request.series = series;
            }
            if (request.dataset.empty()) {
                request.dataset = series.empty() ? std::filesystem::path(pred).parent_path().filename().string()
                                                 : std::filesystem::path(series).stem().string();
            }
            if (request.dataset.empty()) {
                request.dataset = "dataset";
            }
            if (!report.empty()) {
                request.report = report;
            }
            run_eval(request, std::cout);
        } else if (*bench) {
            run_bench(input, cfg, std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "tsigan: " << e.what() << '\n';
        return exit_code(e);
    }
    return 0;
}
