#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace fednam {

// Everything one experiment needs, with defaults that reproduce the
// headline federated MNIST run. Serializes to a flat key=value file;
// unknown keys are rejected so typos fail loudly.
struct RunConfig {
    // dataset
    std::string dataset = "mnist";  // mnist | synth | csv
    std::string data_dir = "data/mnist";
    std::string csv_path;
    std::string csv_label_column = "label";
    int synth_train = 2000;
    int synth_test = 2000;
    int synth_features = 2;
    int synth_classes = 2;

    // federation
    int clients = 3;
    int rounds = 5;
    int local_epochs = 2;
    double learning_rate = 0.01;
    int batch_size = 32;
    std::vector<int> backbone_hidden = {128, 64};
    double calibration_fraction = 0.2;  // held out per client shard

    // additive model
    std::vector<int> nam_hidden = {16, 16};
    int nam_epochs = 3;  // 0 skips the additive model and overlays
    double nam_learning_rate = 0.1;
    std::string contribution_mode = "gradient";  // gradient | value

    // uncertainty
    double alpha = 0.1;
    double beta = 1.5;
    double epsilon = 1e-8;
    std::string quantile_rule = "finite_sample";  // finite_sample | plain
    bool force_argmax = false;
    std::vector<double> sweep_alphas = {0.05, 0.1, 0.2};

    // dropout baseline and benchmark
    int mc_passes = 50;
    double dropout_rate = 0.5;
    int bench_batch = 1024;
    int bench_reps = 5;

    // explanations
    double mask_fraction = 0.3;
    int overlay_count = 3;

    // run control
    std::uint64_t seed = 0;
    int threads = 0;  // 0 = hardware concurrency, capped by FEDNAM_THREADS
    std::string out_dir = "runs/latest";
};

// Applies one key=value pair; throws on unknown keys or unparseable
// values. Shared by the file loader and CLI flag overrides.
void apply_config_override(RunConfig& config, const std::string& key,
                           const std::string& value);

// All fields as sorted key -> value text, %.17g for floats so a
// round trip through the file is bit-exact.
std::map<std::string, std::string> config_to_kv(const RunConfig& config);

// Defaults overlaid with the file's key=value lines. '#' lines and
// blank lines are skipped; later duplicates win.
RunConfig load_config(const std::string& path);

void save_config(const RunConfig& config, const std::string& path);

// Range checks for every numeric field; throws ConfigError.
void validate_config(const RunConfig& config);

}  // namespace fednam
