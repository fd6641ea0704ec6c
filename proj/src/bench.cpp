#include "fednam/bench.hpp"

#include <algorithm>
#include <chrono>
#include <string>
#include <vector>

#include "fednam/dla.hpp"
#include "fednam/error.hpp"
#include "fednam/mlp.hpp"
#include "fednam/pipeline.hpp"
#include "fednam/rng.hpp"

namespace fednam {
namespace {

using Clock = std::chrono::steady_clock;

double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    const std::size_t mid = n / 2;
    return n % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

template <typename Fn>
double timed(const Fn& fn) {
    const auto start = Clock::now();
    fn();
    return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

BenchReport bench_uncertainty(const RunConfig& config) {
    validate_config(config);
    if (config.mc_passes < 2) {
        throw ConfigError("bench: mc_passes = " + std::to_string(config.mc_passes) +
                          "; a single dropout pass has no spread, need at least 2");
    }

    // Pre-load the batch so file I/O never lands inside a timed region;
    // rows are tiled from the configured dataset to reach bench_batch.
    const DatasetPair pair = load_dataset_pair(config);
    const Matrix& source = pair.train.features;
    Matrix batch(static_cast<std::size_t>(config.bench_batch), source.cols);
    for (std::size_t i = 0; i < batch.rows; ++i) {
        const auto row = source.row(i % source.rows);
        std::copy(row.begin(), row.end(), batch.row(i).begin());
    }

    // Untrained weights run the same arithmetic as trained ones.
    std::vector<int> dims;
    dims.push_back(static_cast<int>(batch.cols));
    dims.insert(dims.end(), config.backbone_hidden.begin(), config.backbone_hidden.end());
    dims.push_back(pair.train.num_classes);
    Rng init_rng(config.seed);
    const MlpModel model = MlpModel::he_init(dims, init_rng);

    const DlaConfig dla{config.alpha, config.beta, config.epsilon};
    const auto run_dla = [&] { dla_widths(model, batch, dla); };
    const auto run_mc = [&](std::uint64_t stream) {
        Rng rng = Rng(config.seed).split(stream);
        mc_dropout_predict(model, batch, config.mc_passes, config.dropout_rate, rng);
    };

    run_dla();   // warm-up: page in, settle caches
    run_mc(0);

    std::vector<double> dla_times;
    std::vector<double> mc_times;
    dla_times.reserve(static_cast<std::size_t>(config.bench_reps));
    mc_times.reserve(static_cast<std::size_t>(config.bench_reps));
    for (int rep = 0; rep < config.bench_reps; ++rep) {
        dla_times.push_back(timed(run_dla));
    }
    for (int rep = 0; rep < config.bench_reps; ++rep) {
        mc_times.push_back(timed([&] { run_mc(static_cast<std::uint64_t>(rep) + 1); }));
    }

    BenchReport report;
    report.t_dla = median_of(std::move(dla_times));
    report.t_mc = median_of(std::move(mc_times));
    report.batch = batch.rows;
    report.passes = config.mc_passes;
    report.reps = config.bench_reps;
    report.ratio = report.t_mc / report.t_dla;
    return report;
}

}  // namespace fednam
