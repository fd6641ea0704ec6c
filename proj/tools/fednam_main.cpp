// Command-line front end: subcommands train / calibrate / explain /
// bench / sweep over one shared flag set. Config resolution order is
// built-in defaults, then --config file, then explicit flags.
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fednam/bench.hpp"
#include "fednam/config.hpp"
#include "fednam/error.hpp"
#include "fednam/pipeline.hpp"

namespace {

using fednam::RunConfig;

void print_uncertainty(const fednam::RunArtifacts& art) {
    std::printf("accuracy %.4f | tau %.6f | coverage %.4f | mean width %.4f | mean set size %.3f\n",
                art.accuracy, art.tau, art.report.coverage, art.report.mean_width,
                art.report.mean_set_size);
    std::printf("class  mean_width  count\n");
    for (std::size_t c = 0; c < art.report.class_mean_width.size(); ++c) {
        const auto& width = art.report.class_mean_width[c];
        if (width) {
            std::printf("%5zu  %10.6f  %5zu\n", c, *width, art.report.class_counts[c]);
        } else {
            std::printf("%5zu  %10s  %5zu\n", c, "-", art.report.class_counts[c]);
        }
    }
}

void write_bench_json(const fednam::BenchReport& report, const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(std::filesystem::path(path).parent_path(), ec);
    nlohmann::json j;
    j["batch"] = report.batch;
    j["passes"] = report.passes;
    j["reps"] = report.reps;
    j["t_dla_seconds"] = report.t_dla;
    j["t_mc_seconds"] = report.t_mc;
    j["ratio"] = report.ratio;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw fednam::IoError("cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"federated conformal-uncertainty laboratory"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::string> dataset;
    std::optional<std::string> out_dir;
    std::optional<int> clients;
    std::optional<int> rounds;
    std::optional<int> mc_passes;
    std::optional<double> alpha;
    std::optional<double> beta;
    std::optional<double> epsilon;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> extra_overrides;

    app.add_option("--config", config_path, "key=value config file to load first");
    app.add_option("--dataset", dataset, "dataset kind")
        ->check(CLI::IsMember({"mnist", "synth", "csv"}));
    app.add_option("--clients", clients, "number of federated clients");
    app.add_option("--rounds", rounds, "federated rounds");
    app.add_option("--alpha", alpha, "target miscoverage level");
    app.add_option("--beta", beta, "width boost for sensitive samples");
    app.add_option("--epsilon", epsilon, "normalization guard");
    app.add_option("--mc-passes", mc_passes, "MC dropout passes");
    app.add_option("--seed", seed, "RNG seed");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--set", extra_overrides, "extra key=value override, repeatable");

    CLI::App* cmd_train = app.add_subcommand("train", "run the full federated experiment");
    CLI::App* cmd_calibrate =
        app.add_subcommand("calibrate", "re-run conformal calibration on a saved backbone");
    CLI::App* cmd_explain =
        app.add_subcommand("explain", "rebuild contribution overlays from a saved additive model");
    CLI::App* cmd_bench = app.add_subcommand("bench", "time DLA widths against MC dropout");
    CLI::App* cmd_sweep = app.add_subcommand("sweep", "coverage-vs-alpha sweep on a saved backbone");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : fednam::kConfigError;
    }

    try {
        RunConfig config;
        if (!config_path.empty()) {
            config = fednam::load_config(config_path);
        }
        if (dataset) config.dataset = *dataset;
        if (clients) config.clients = *clients;
        if (rounds) config.rounds = *rounds;
        if (alpha) config.alpha = *alpha;
        if (beta) config.beta = *beta;
        if (epsilon) config.epsilon = *epsilon;
        if (mc_passes) config.mc_passes = *mc_passes;
        if (seed) config.seed = *seed;
        if (out_dir) config.out_dir = *out_dir;
        for (const std::string& kv : extra_overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) {
                throw fednam::ConfigError("--set expects key=value, got '" + kv + "'");
            }
            fednam::apply_config_override(config, kv.substr(0, eq), kv.substr(eq + 1));
        }

        if (cmd_train->parsed()) {
            const fednam::RunArtifacts art = fednam::run_experiment(config);
            for (const auto& record : art.history) {
                std::printf("round %d: loss %.6f -> %.6f | grad_norm_sq %.6f | slack %.3e\n",
                            record.round, record.loss_before, record.loss_after,
                            record.grad_norm_sq, record.slack);
            }
            print_uncertainty(art);
            std::printf("outputs: %s\n", art.out_dir.c_str());
        } else if (cmd_calibrate->parsed()) {
            const fednam::RunArtifacts art = fednam::run_calibrate(config);
            print_uncertainty(art);
            std::printf("outputs: %s\n", art.out_dir.c_str());
        } else if (cmd_explain->parsed()) {
            fednam::run_explain(config);
            std::printf("overlays: %s/overlays\n", config.out_dir.c_str());
        } else if (cmd_bench->parsed()) {
            const fednam::BenchReport report = fednam::bench_uncertainty(config);
            std::printf("batch %zu | passes %d | reps %d\n", report.batch, report.passes,
                        report.reps);
            std::printf("t_dla %.6fs | t_mc %.6fs | ratio %.3f\n", report.t_dla, report.t_mc,
                        report.ratio);
            write_bench_json(report, config.out_dir + "/bench.json");
            std::printf("outputs: %s/bench.json\n", config.out_dir.c_str());
        } else if (cmd_sweep->parsed()) {
            fednam::run_sweep(config);
            std::printf("outputs: %s/coverage_sweep.csv\n", config.out_dir.c_str());
        }
        return fednam::kOk;
    } catch (const fednam::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
