#include "fednam/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fednam/classifier.hpp"
#include "fednam/csv_data.hpp"
#include "fednam/dla.hpp"
#include "fednam/error.hpp"
#include "fednam/idx.hpp"
#include "fednam/interpret.hpp"
#include "fednam/nam.hpp"
#include "fednam/parallel.hpp"
#include "fednam/param_vector.hpp"
#include "fednam/synth.hpp"

namespace fednam {
namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

// Derived RNG stream ids; client streams are seed XOR (1..K), so these
// stay clear of small integers.
constexpr std::uint64_t kNamStream = 0x6d616e2d73756273;  // additive-model init/shuffle
constexpr std::uint64_t kCsvSplitStream = 0x6373762d73706c69;  // csv train/test shuffle

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Runs one pipeline stage; a failing stage rethrows with its name so
// the CLI error names where the run died, keeping the exit code.
template <typename Fn>
decltype(auto) run_stage(const char* name, Fn&& fn) {
    try {
        return std::forward<Fn>(fn)();
    } catch (const Error& e) {
        throw Error(std::string(name) + ": " + e.what(), e.exit_code());
    }
}

std::string path_join(const std::string& dir, const std::string& name) {
    if (dir.empty()) return name;
    return dir.back() == '/' ? dir + name : dir + "/" + name;
}

void ensure_dir(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) {
        throw IoError("cannot create directory " + path + ": " + ec.message());
    }
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open " + path + " for writing");
    }
    return out;
}

// Full-precision float text, same convention as the CSV/config writers:
// shortest %.17g form that round-trips the double exactly.
std::string g17(double value) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return buffer;
}

QuantileRule rule_from(const std::string& name) {
    return name == "plain" ? QuantileRule::plain : QuantileRule::finite_sample;
}

ContributionMode mode_from(const std::string& name) {
    return name == "value" ? ContributionMode::value : ContributionMode::gradient;
}

std::vector<int> backbone_dims(const RunConfig& config, const Dataset& data) {
    std::vector<int> dims;
    dims.reserve(config.backbone_hidden.size() + 2);
    dims.push_back(static_cast<int>(data.dim()));
    dims.insert(dims.end(), config.backbone_hidden.begin(), config.backbone_hidden.end());
    dims.push_back(data.num_classes);
    return dims;
}

double label_accuracy(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size()) {
        throw DimensionError("accuracy: " + std::to_string(predicted.size()) +
                             " predictions vs " + std::to_string(truth.size()) + " labels");
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        hits += predicted[i] == truth[i] ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

// Everything computed between "trained backbone" and "files on disk".
struct EvalResult {
    double accuracy_before = 0.0;  // raw backbone argmax accuracy
    double accuracy_after = 0.0;   // argmax accuracy after conformal wrapping
    CalibrationResult cal;
    std::vector<std::vector<int>> sets;
    std::vector<int> predicted;
    std::vector<double> widths;
    UncertaintyReport report;
    std::vector<SweepRow> sweep;
};

struct Timing {
    double federated = 0.0;
    double calibrate = 0.0;
    double widths = 0.0;
    double nam = 0.0;
    double total = 0.0;
};

std::vector<std::vector<int>> sets_for(const Matrix& probs, double tau, bool force_argmax) {
    std::vector<std::vector<int>> sets;
    sets.reserve(probs.rows);
    for (std::size_t i = 0; i < probs.rows; ++i) {
        sets.push_back(prediction_set(probs.row(i), tau, force_argmax));
    }
    return sets;
}

double mean_set_size(const std::vector<std::vector<int>>& sets) {
    std::size_t total = 0;
    for (const auto& set : sets) total += set.size();
    return sets.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(sets.size());
}

// Calibration, prediction sets, interval widths, class-wise aggregates,
// and the coverage sweep, all against a fixed model. Conformal wrapping
// is post hoc, so accuracy_after is computed from the wrapped run's own
// argmax labels and must equal accuracy_before.
EvalResult evaluate_uncertainty(const RunConfig& config, const MlpModel& model,
                                const Dataset& calibration, const Dataset& test) {
    EvalResult ev;
    ev.accuracy_before = label_accuracy(predict_labels(model, test.features), test.labels);

    const Matrix probs_cal = predict_probs(model, calibration.features);
    std::vector<double> scores = nonconformity(probs_cal, calibration.labels);

    const QuantileRule rule = rule_from(config.quantile_rule);
    auto start = Clock::now();
    ev.cal = calibrate(std::move(scores), config.alpha, rule);
    const double seconds_calibrate = seconds_since(start);

    const Matrix probs_test = predict_probs(model, test.features);
    ev.predicted = argmax_rows(probs_test);
    ev.sets = sets_for(probs_test, ev.cal.tau, config.force_argmax);

    const DlaConfig dla{config.alpha, config.beta, config.epsilon};
    start = Clock::now();
    ev.widths = dla_widths(model, test.features, dla);
    const double seconds_widths = seconds_since(start);

    ev.report = classwise_uncertainty(ev.widths, ev.predicted, test.num_classes);
    ev.report.seconds_calibrate = seconds_calibrate;
    ev.report.seconds_widths = seconds_widths;
    ev.report.coverage = coverage_audit(ev.sets, test.labels);
    ev.report.mean_set_size = mean_set_size(ev.sets);

    ev.accuracy_after = label_accuracy(ev.predicted, test.labels);

    std::vector<double> alphas = config.sweep_alphas;
    std::sort(alphas.begin(), alphas.end());
    ev.sweep.reserve(alphas.size());
    for (double alpha : alphas) {
        const CalibrationResult cal = calibrate(ev.cal.scores, alpha, rule);
        const auto sets = sets_for(probs_test, cal.tau, config.force_argmax);
        ev.sweep.push_back(SweepRow{alpha, cal.tau, coverage_audit(sets, test.labels),
                                    mean_set_size(sets)});
    }
    return ev;
}

void emit_per_sample(const EvalResult& ev, const Dataset& test, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "index,predicted,set_size,covered,width\n";
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto& set = ev.sets[i];
        const bool covered = std::find(set.begin(), set.end(), test.labels[i]) != set.end();
        out << i << ',' << ev.predicted[i] << ',' << set.size() << ',' << (covered ? 1 : 0)
            << ',' << g17(ev.widths[i]) << '\n';
    }
    if (!out) throw IoError("failed writing " + path);
}

void emit_overlays(const NamModel& nam, const Dataset& test, const RunConfig& config) {
    const auto [height, width] = *test.image_shape;
    const ContributionMode mode = mode_from(config.contribution_mode);
    const std::size_t count =
        std::min<std::size_t>(static_cast<std::size_t>(config.overlay_count), test.size());
    for (std::size_t i = 0; i < count; ++i) {
        const auto sample = test.features.row(i);
        const ContributionMap map = nam_contribution_map(nam, sample, mode);
        const PixelMask mask = top_fraction_mask(map.scores, config.mask_fraction);
        char name[32];
        std::snprintf(name, sizeof(name), "sample_%03zu", i);
        export_overlay(sample, height, width, mask,
                       path_join(path_join(config.out_dir, "overlays"), name));
    }
}

void write_report_json(const RunConfig& config, const DatasetPair& pair, const EvalResult& ev,
                       const std::vector<RoundRecord>* history,
                       const std::vector<double>* nam_losses, const std::string& path) {
    json j;
    // Conformal wrapping never moves the argmax, so the two accuracies
    // are reported side by side and agree by construction.
    j["accuracy"]["before_framework"] = ev.accuracy_before;
    j["accuracy"]["after_framework"] = ev.accuracy_after;

    j["config"] = config_to_kv(config);

    j["dataset"]["kind"] = config.dataset;
    j["dataset"]["train_samples"] = pair.train.size();
    j["dataset"]["test_samples"] = pair.test.size();
    j["dataset"]["features"] = pair.train.dim();
    j["dataset"]["classes"] = pair.train.num_classes;
    j["dataset"]["source_train"] = pair.train.source;
    j["dataset"]["source_test"] = pair.test.source;

    j["conformal"]["alpha"] = config.alpha;
    j["conformal"]["quantile_rule"] = config.quantile_rule;
    j["conformal"]["tau"] = ev.cal.tau;
    j["conformal"]["calibration_samples"] = ev.cal.n;
    j["conformal"]["coverage"] = ev.report.coverage;
    j["conformal"]["mean_set_size"] = ev.report.mean_set_size;
    j["conformal"]["force_argmax"] = config.force_argmax;

    j["uncertainty"]["beta"] = config.beta;
    j["uncertainty"]["epsilon"] = config.epsilon;
    j["uncertainty"]["mean_width"] = ev.report.mean_width;
    json class_width = json::array();
    for (const auto& width : ev.report.class_mean_width) {
        class_width.push_back(width ? json(*width) : json(nullptr));
    }
    j["uncertainty"]["class_mean_width"] = std::move(class_width);
    j["uncertainty"]["class_counts"] = ev.report.class_counts;

    if (history != nullptr) {
        j["federated"]["clients"] = config.clients;
        j["federated"]["rounds_completed"] = history->size();
        if (history->empty()) {
            j["federated"]["final_train_loss"] = nullptr;
            j["federated"]["max_slack"] = nullptr;
        } else {
            j["federated"]["final_train_loss"] = history->back().loss_after;
            double max_slack = history->front().slack;
            for (const auto& record : *history) max_slack = std::max(max_slack, record.slack);
            j["federated"]["max_slack"] = max_slack;
        }
    } else {
        j["federated"] = nullptr;  // calibrate-only run against a checkpoint
    }

    if (nam_losses != nullptr) {
        j["additive_model"]["epochs"] = nam_losses->size();
        j["additive_model"]["epoch_losses"] = *nam_losses;
    } else {
        j["additive_model"] = nullptr;
    }

    std::ofstream out = open_out(path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path);
}

// Wall-clock numbers live in their own file so every other output is
// byte-identical across runs of the same seed and config.
void write_timing(const Timing& timing, const std::string& path) {
    json j;
    j["seconds_federated"] = timing.federated;
    j["seconds_calibrate"] = timing.calibrate;
    j["seconds_widths"] = timing.widths;
    j["seconds_additive_model"] = timing.nam;
    j["seconds_total"] = timing.total;
    std::ofstream out = open_out(path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path);
}

MlpModel load_backbone(const RunConfig& config, const Dataset& train) {
    MlpModel model(backbone_dims(config, train));
    model.from_params(load_params(path_join(config.out_dir, "backbone.fnpv")));
    return model;
}

}  // namespace

DatasetPair load_dataset_pair(const RunConfig& config) {
    if (config.dataset == "mnist") {
        DatasetPair pair{
            read_idx(path_join(config.data_dir, "train-images-idx3-ubyte"),
                     path_join(config.data_dir, "train-labels-idx1-ubyte")),
            read_idx(path_join(config.data_dir, "t10k-images-idx3-ubyte"),
                     path_join(config.data_dir, "t10k-labels-idx1-ubyte")),
        };
        // Each file infers its class count from its own labels; a split
        // that happens to miss a digit must not shrink the model head.
        const int classes = std::max(pair.train.num_classes, pair.test.num_classes);
        pair.train.num_classes = classes;
        pair.test.num_classes = classes;
        return pair;
    }
    if (config.dataset == "synth") {
        const std::size_t train_n = static_cast<std::size_t>(config.synth_train);
        const std::size_t test_n = static_cast<std::size_t>(config.synth_test);
        // One exchangeable draw, sliced; train/test come from the same
        // distribution by construction.
        const SynthDataset sd =
            synth_classification(train_n + test_n, static_cast<std::size_t>(config.synth_features),
                                 config.synth_classes, config.seed);
        std::vector<std::size_t> head(train_n);
        std::iota(head.begin(), head.end(), 0);
        std::vector<std::size_t> tail(test_n);
        std::iota(tail.begin(), tail.end(), train_n);
        return DatasetPair{subset(sd.dataset, head), subset(sd.dataset, tail)};
    }
    // validate_config whitelists the dataset names, so this is csv.
    const Dataset full = read_csv_tabular(config.csv_path, config.csv_label_column);
    if (full.size() < 2) {
        throw DataError("csv dataset has " + std::to_string(full.size()) +
                        " rows; need at least 2 to split train/test");
    }
    std::vector<std::size_t> order(full.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng(config.seed).split(kCsvSplitStream);
    rng.shuffle(order);
    const std::size_t test_n = std::clamp<std::size_t>(full.size() / 5, 1, full.size() - 1);
    const std::vector<std::size_t> train_idx(order.begin(), order.end() - test_n);
    const std::vector<std::size_t> test_idx(order.end() - test_n, order.end());
    return DatasetPair{subset(full, train_idx), subset(full, test_idx)};
}

FederatedSplit split_for_federation(const RunConfig& config, const Dataset& train) {
    const PartitionPlan plan = partition_iid(train, config.clients, config.seed);
    FederatedSplit split;
    split.client_shards.reserve(plan.shards.size());
    std::vector<std::size_t> pooled;
    for (const auto& shard : plan.shards) {
        const std::size_t n = shard.size();
        std::size_t hold = 0;
        if (n >= 2) {
            hold = static_cast<std::size_t>(config.calibration_fraction *
                                            static_cast<double>(n));
            hold = std::clamp<std::size_t>(hold, 1, n - 1);
        }
        // Shard order is already a seeded shuffle, so the tail is a
        // random holdout; the head stays with the client for training.
        pooled.insert(pooled.end(), shard.end() - static_cast<std::ptrdiff_t>(hold),
                      shard.end());
        const std::vector<std::size_t> local(shard.begin(),
                                             shard.end() - static_cast<std::ptrdiff_t>(hold));
        split.client_shards.push_back(subset(train, local));
    }
    if (pooled.empty()) {
        throw DataError("calibration holdout is empty: every client shard has a single sample");
    }
    split.calibration = subset(train, pooled);
    return split;
}

FederatedResult train_federated(const RunConfig& config, const Dataset& train) {
    FederatedSplit split = split_for_federation(config, train);

    Rng init_rng(config.seed);
    MlpModel global = MlpModel::he_init(backbone_dims(config, train), init_rng);

    ServerState server;
    server.global_params = global.to_params();

    const Rng base(config.seed);
    const LocalOpt opt{config.learning_rate, config.batch_size, config.local_epochs};
    std::vector<ClientState> clients;
    clients.reserve(split.client_shards.size());
    for (std::size_t k = 0; k < split.client_shards.size(); ++k) {
        // Stream k+1: stream 0 would collide with the server's own seed.
        clients.emplace_back(static_cast<int>(k), std::move(split.client_shards[k]), global,
                             opt, base.split(k + 1));
    }

    const int threads = resolve_threads(config.threads);
    for (int round = 0; round < config.rounds; ++round) {
        run_round(server, clients, config.learning_rate, config.local_epochs, threads);
    }

    global.from_params(server.global_params);
    return FederatedResult{std::move(global), std::move(server.history),
                           std::move(split.calibration)};
}

void emit_plot_data(const PlotBundle& bundle, const std::string& out_dir) {
    if (bundle.predicted.size() != bundle.widths.size()) {
        throw DimensionError("plot data: " + std::to_string(bundle.predicted.size()) +
                             " predictions vs " + std::to_string(bundle.widths.size()) +
                             " widths");
    }
    {
        std::ofstream out = open_out(path_join(out_dir, "bounds.csv"));
        out << "index,prediction,lower,upper\n";
        for (std::size_t i = 0; i < bundle.predicted.size(); ++i) {
            const double prediction = static_cast<double>(bundle.predicted[i]);
            const double half = bundle.widths[i] / 2.0;
            out << i << ',' << g17(prediction) << ',' << g17(prediction - half) << ','
                << g17(prediction + half) << '\n';
        }
        if (!out) throw IoError("failed writing bounds.csv");
    }
    {
        std::ofstream out = open_out(path_join(out_dir, "class_uncertainty.csv"));
        out << "class,mean_width,count\n";
        for (std::size_t c = 0; c < bundle.report.class_mean_width.size(); ++c) {
            const auto& width = bundle.report.class_mean_width[c];
            // No predictions for this class: empty field, not a fake 0.
            out << c << ',' << (width ? g17(*width) : "") << ','
                << bundle.report.class_counts[c] << '\n';
        }
        if (!out) throw IoError("failed writing class_uncertainty.csv");
    }
    {
        std::ofstream out = open_out(path_join(out_dir, "coverage_sweep.csv"));
        out << "alpha,tau,coverage,mean_set_size\n";
        for (const auto& row : bundle.sweep) {
            out << g17(row.alpha) << ',' << g17(row.tau) << ',' << g17(row.coverage) << ','
                << g17(row.mean_set_size) << '\n';
        }
        if (!out) throw IoError("failed writing coverage_sweep.csv");
    }
}

RunArtifacts run_experiment(const RunConfig& config) {
    validate_config(config);
    const auto total_start = Clock::now();
    Timing timing;

    const DatasetPair pair =
        run_stage("load-data", [&] { return load_dataset_pair(config); });

    run_stage("prepare-output", [&] {
        ensure_dir(config.out_dir);
        save_config(config, path_join(config.out_dir, "config.cfg"));
    });

    FederatedResult fed = run_stage("federated-training", [&] {
        const auto start = Clock::now();
        FederatedResult result = train_federated(config, pair.train);
        timing.federated = seconds_since(start);
        return result;
    });

    run_stage("emit-history", [&] {
        export_round_history(fed.history, path_join(config.out_dir, "round_history.csv"));
        save_params(fed.model.to_params(), path_join(config.out_dir, "backbone.fnpv"));
    });

    const EvalResult ev = run_stage("uncertainty", [&] {
        return evaluate_uncertainty(config, fed.model, fed.calibration, pair.test);
    });
    timing.calibrate = ev.report.seconds_calibrate;
    timing.widths = ev.report.seconds_widths;

    std::vector<double> nam_losses;
    bool nam_trained = false;
    if (config.nam_epochs > 0) {
        run_stage("additive-model", [&] {
            const auto start = Clock::now();
            Rng nam_rng = Rng(config.seed).split(kNamStream);
            NamModel nam = NamModel::he_init(static_cast<int>(pair.train.dim()),
                                             pair.train.num_classes, config.nam_hidden, nam_rng);
            nam_losses = train_nam(nam, pair.train.features, pair.train.labels,
                                   config.nam_epochs, config.nam_learning_rate,
                                   config.batch_size, nam_rng, resolve_threads(config.threads));
            timing.nam = seconds_since(start);
            save_params(nam.to_params(), path_join(config.out_dir, "nam.fnpv"));
            if (pair.test.image_shape) {
                ensure_dir(path_join(config.out_dir, "overlays"));
                emit_overlays(nam, pair.test, config);
            }
        });
        nam_trained = true;
    }

    run_stage("emit-report", [&] {
        emit_per_sample(ev, pair.test, path_join(config.out_dir, "per_sample.csv"));
        emit_plot_data(PlotBundle{ev.predicted, ev.widths, ev.report, ev.sweep},
                       config.out_dir);
        write_report_json(config, pair, ev, &fed.history,
                          nam_trained ? &nam_losses : nullptr,
                          path_join(config.out_dir, "report.json"));
        timing.total = seconds_since(total_start);
        write_timing(timing, path_join(config.out_dir, "timing.json"));
    });

    return RunArtifacts{ev.accuracy_before, ev.cal.tau, ev.report, std::move(fed.history),
                        config.out_dir};
}

RunArtifacts run_calibrate(const RunConfig& config) {
    validate_config(config);
    const auto total_start = Clock::now();
    Timing timing;

    const DatasetPair pair =
        run_stage("load-data", [&] { return load_dataset_pair(config); });
    const FederatedSplit split =
        run_stage("load-data", [&] { return split_for_federation(config, pair.train); });

    const MlpModel model =
        run_stage("load-checkpoint", [&] { return load_backbone(config, pair.train); });

    const EvalResult ev = run_stage("uncertainty", [&] {
        return evaluate_uncertainty(config, model, split.calibration, pair.test);
    });
    timing.calibrate = ev.report.seconds_calibrate;
    timing.widths = ev.report.seconds_widths;

    run_stage("emit-report", [&] {
        ensure_dir(config.out_dir);
        save_config(config, path_join(config.out_dir, "config.cfg"));
        emit_per_sample(ev, pair.test, path_join(config.out_dir, "per_sample.csv"));
        emit_plot_data(PlotBundle{ev.predicted, ev.widths, ev.report, ev.sweep},
                       config.out_dir);
        write_report_json(config, pair, ev, nullptr, nullptr,
                          path_join(config.out_dir, "report.json"));
        timing.total = seconds_since(total_start);
        write_timing(timing, path_join(config.out_dir, "timing.json"));
    });

    return RunArtifacts{ev.accuracy_before, ev.cal.tau, ev.report, {}, config.out_dir};
}

void run_explain(const RunConfig& config) {
    validate_config(config);

    const DatasetPair pair =
        run_stage("load-data", [&] { return load_dataset_pair(config); });
    if (!pair.test.image_shape) {
        throw ConfigError("explain: dataset '" + config.dataset +
                          "' has no image shape; overlays need image features");
    }

    const NamModel nam = run_stage("load-checkpoint", [&] {
        NamModel model(static_cast<int>(pair.train.dim()), pair.train.num_classes,
                       config.nam_hidden);
        model.from_params(load_params(path_join(config.out_dir, "nam.fnpv")));
        return model;
    });

    run_stage("emit-overlays", [&] {
        ensure_dir(path_join(config.out_dir, "overlays"));
        emit_overlays(nam, pair.test, config);
    });
}

void run_sweep(const RunConfig& config) {
    validate_config(config);

    const DatasetPair pair =
        run_stage("load-data", [&] { return load_dataset_pair(config); });
    const FederatedSplit split =
        run_stage("load-data", [&] { return split_for_federation(config, pair.train); });
    const MlpModel model =
        run_stage("load-checkpoint", [&] { return load_backbone(config, pair.train); });

    const EvalResult ev = run_stage("uncertainty", [&] {
        return evaluate_uncertainty(config, model, split.calibration, pair.test);
    });

    run_stage("emit-report", [&] {
        ensure_dir(config.out_dir);
        emit_plot_data(PlotBundle{ev.predicted, ev.widths, ev.report, ev.sweep},
                       config.out_dir);
    });
}

}  // namespace fednam
