#include "fednam/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "fednam/error.hpp"

namespace fednam {
namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& key, const std::string& value) {
    // from_chars, not stod: stod rejects subnormals with out_of_range,
    // which would break the lossless round trip for tiny epsilons.
    double v = 0.0;
    const char* begin = value.data();
    const char* end = begin + value.size();
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec == std::errc{} && ptr == end) return v;
    throw ConfigError("config key '" + key + "': cannot parse '" + value +
                      "' as a number");
}

int parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': cannot parse '" + value +
                          "' as an integer");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        // stoull would silently wrap a leading minus around 2^64.
        if (value.empty() || value.front() == '-' || value.front() == '+') {
            throw std::invalid_argument(value);
        }
        std::size_t used = 0;
        const std::uint64_t v = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': cannot parse '" + value +
                          "' as an unsigned integer");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config key '" + key + "': cannot parse '" + value +
                      "' as true/false");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    if (trim(value).empty()) return out;
    std::stringstream stream(value);
    std::string item;
    while (std::getline(stream, item, ',')) out.push_back(parse_int(key, trim(item)));
    return out;
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    if (trim(value).empty()) return out;
    std::stringstream stream(value);
    std::string item;
    while (std::getline(stream, item, ',')) out.push_back(parse_double(key, trim(item)));
    return out;
}

template <typename T>
std::string join_list(const std::vector<T>& values,
                      const std::function<std::string(T)>& fmt) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) out += ",";
        out += fmt(values[i]);
    }
    return out;
}

}  // namespace

void apply_config_override(RunConfig& c, const std::string& key, const std::string& value) {
    if (key == "dataset") c.dataset = value;
    else if (key == "data_dir") c.data_dir = value;
    else if (key == "csv_path") c.csv_path = value;
    else if (key == "csv_label_column") c.csv_label_column = value;
    else if (key == "synth_train") c.synth_train = parse_int(key, value);
    else if (key == "synth_test") c.synth_test = parse_int(key, value);
    else if (key == "synth_features") c.synth_features = parse_int(key, value);
    else if (key == "synth_classes") c.synth_classes = parse_int(key, value);
    else if (key == "clients") c.clients = parse_int(key, value);
    else if (key == "rounds") c.rounds = parse_int(key, value);
    else if (key == "local_epochs") c.local_epochs = parse_int(key, value);
    else if (key == "learning_rate") c.learning_rate = parse_double(key, value);
    else if (key == "batch_size") c.batch_size = parse_int(key, value);
    else if (key == "backbone_hidden") c.backbone_hidden = parse_int_list(key, value);
    else if (key == "calibration_fraction") c.calibration_fraction = parse_double(key, value);
    else if (key == "nam_hidden") c.nam_hidden = parse_int_list(key, value);
    else if (key == "nam_epochs") c.nam_epochs = parse_int(key, value);
    else if (key == "nam_learning_rate") c.nam_learning_rate = parse_double(key, value);
    else if (key == "contribution_mode") c.contribution_mode = value;
    else if (key == "alpha") c.alpha = parse_double(key, value);
    else if (key == "beta") c.beta = parse_double(key, value);
    else if (key == "epsilon") c.epsilon = parse_double(key, value);
    else if (key == "quantile_rule") c.quantile_rule = value;
    else if (key == "force_argmax") c.force_argmax = parse_bool(key, value);
    else if (key == "sweep_alphas") c.sweep_alphas = parse_double_list(key, value);
    else if (key == "mc_passes") c.mc_passes = parse_int(key, value);
    else if (key == "dropout_rate") c.dropout_rate = parse_double(key, value);
    else if (key == "bench_batch") c.bench_batch = parse_int(key, value);
    else if (key == "bench_reps") c.bench_reps = parse_int(key, value);
    else if (key == "mask_fraction") c.mask_fraction = parse_double(key, value);
    else if (key == "overlay_count") c.overlay_count = parse_int(key, value);
    else if (key == "seed") c.seed = parse_u64(key, value);
    else if (key == "threads") c.threads = parse_int(key, value);
    else if (key == "out_dir") c.out_dir = value;
    else throw ConfigError("unknown config key '" + key + "'");
}

std::map<std::string, std::string> config_to_kv(const RunConfig& c) {
    const std::function<std::string(int)> fmt_int = [](int v) { return std::to_string(v); };
    const std::function<std::string(double)> fmt_double = format_double;
    return {
        {"dataset", c.dataset},
        {"data_dir", c.data_dir},
        {"csv_path", c.csv_path},
        {"csv_label_column", c.csv_label_column},
        {"synth_train", std::to_string(c.synth_train)},
        {"synth_test", std::to_string(c.synth_test)},
        {"synth_features", std::to_string(c.synth_features)},
        {"synth_classes", std::to_string(c.synth_classes)},
        {"clients", std::to_string(c.clients)},
        {"rounds", std::to_string(c.rounds)},
        {"local_epochs", std::to_string(c.local_epochs)},
        {"learning_rate", format_double(c.learning_rate)},
        {"batch_size", std::to_string(c.batch_size)},
        {"backbone_hidden", join_list(c.backbone_hidden, fmt_int)},
        {"calibration_fraction", format_double(c.calibration_fraction)},
        {"nam_hidden", join_list(c.nam_hidden, fmt_int)},
        {"nam_epochs", std::to_string(c.nam_epochs)},
        {"nam_learning_rate", format_double(c.nam_learning_rate)},
        {"contribution_mode", c.contribution_mode},
        {"alpha", format_double(c.alpha)},
        {"beta", format_double(c.beta)},
        {"epsilon", format_double(c.epsilon)},
        {"quantile_rule", c.quantile_rule},
        {"force_argmax", c.force_argmax ? "true" : "false"},
        {"sweep_alphas", join_list(c.sweep_alphas, fmt_double)},
        {"mc_passes", std::to_string(c.mc_passes)},
        {"dropout_rate", format_double(c.dropout_rate)},
        {"bench_batch", std::to_string(c.bench_batch)},
        {"bench_reps", std::to_string(c.bench_reps)},
        {"mask_fraction", format_double(c.mask_fraction)},
        {"overlay_count", std::to_string(c.overlay_count)},
        {"seed", std::to_string(c.seed)},
        {"threads", std::to_string(c.threads)},
        {"out_dir", c.out_dir},
    };
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config file '" + path + "'");
    }
    RunConfig config;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped.front() == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config file '" + path + "' line " +
                              std::to_string(line_number) + ": expected key=value");
        }
        apply_config_override(config, trim(stripped.substr(0, eq)),
                              trim(stripped.substr(eq + 1)));
    }
    return config;
}

void save_config(const RunConfig& config, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    for (const auto& [key, value] : config_to_kv(config)) {
        out << key << "=" << value << "\n";
    }
    if (!out) {
        throw IoError("write failure on '" + path + "'");
    }
}

void validate_config(const RunConfig& c) {
    const auto fail = [](const std::string& what) { throw ConfigError("config: " + what); };
    if (c.dataset != "mnist" && c.dataset != "synth" && c.dataset != "csv") {
        fail("dataset must be mnist, synth, or csv, got '" + c.dataset + "'");
    }
    if (c.dataset == "csv" && c.csv_path.empty()) fail("csv dataset needs csv_path");
    if (c.synth_train < c.synth_classes || c.synth_test < 1) {
        fail("synth sizes must cover every class");
    }
    if (c.synth_features < 1 || c.synth_classes < 2) {
        fail("synth needs >= 1 feature and >= 2 classes");
    }
    if (c.clients < 1) fail("clients must be >= 1");
    if (c.rounds < 0) fail("rounds must be >= 0");
    if (c.local_epochs < 1) fail("local_epochs must be >= 1");
    if (!(c.learning_rate > 0.0)) fail("learning_rate must be > 0");
    if (c.batch_size < 1) fail("batch_size must be >= 1");
    for (const int h : c.backbone_hidden) {
        if (h < 1) fail("backbone_hidden entries must be >= 1");
    }
    if (!(c.calibration_fraction > 0.0 && c.calibration_fraction < 1.0)) {
        fail("calibration_fraction must lie in (0,1)");
    }
    for (const int h : c.nam_hidden) {
        if (h < 1) fail("nam_hidden entries must be >= 1");
    }
    if (c.nam_epochs < 0) fail("nam_epochs must be >= 0");
    if (!(c.nam_learning_rate > 0.0)) fail("nam_learning_rate must be > 0");
    if (c.contribution_mode != "gradient" && c.contribution_mode != "value") {
        fail("contribution_mode must be gradient or value");
    }
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) fail("alpha must lie in (0,1)");
    if (!(c.beta >= 1.0)) fail("beta must be >= 1");
    if (!(c.epsilon > 0.0)) fail("epsilon must be > 0");
    if (c.quantile_rule != "finite_sample" && c.quantile_rule != "plain") {
        fail("quantile_rule must be finite_sample or plain");
    }
    if (c.sweep_alphas.empty()) fail("sweep_alphas must not be empty");
    for (const double a : c.sweep_alphas) {
        if (!(a > 0.0 && a < 1.0)) fail("sweep_alphas entries must lie in (0,1)");
    }
    if (c.mc_passes < 1) fail("mc_passes must be >= 1");
    if (!(c.dropout_rate >= 0.0 && c.dropout_rate < 1.0)) {
        fail("dropout_rate must lie in [0,1)");
    }
    if (c.bench_batch < 1) fail("bench_batch must be >= 1");
    if (c.bench_reps < 5) fail("bench_reps must be >= 5");
    if (!(c.mask_fraction > 0.0 && c.mask_fraction <= 1.0)) {
        fail("mask_fraction must lie in (0,1]");
    }
    if (c.overlay_count < 0) fail("overlay_count must be >= 0");
    if (c.threads < 0) fail("threads must be >= 0");
    if (c.out_dir.empty()) fail("out_dir must not be empty");
}

}  // namespace fednam
