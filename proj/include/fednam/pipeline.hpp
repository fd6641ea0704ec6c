#pragma once

#include <string>
#include <vector>

#include "fednam/config.hpp"
#include "fednam/conformal.hpp"
#include "fednam/dataset.hpp"
#include "fednam/fedsim.hpp"
#include "fednam/mlp.hpp"

namespace fednam {

struct DatasetPair {
    Dataset train;
    Dataset test;
};

// Materializes the configured dataset: the bundled digit files, a
// synthetic draw (train and test sliced from one exchangeable sample),
// or a CSV split 80/20 by a seeded shuffle.
DatasetPair load_dataset_pair(const RunConfig& config);

// Client shards with the calibration fraction of each shard held out
// and pooled. Pure function of config and data, so a later calibrate
// or sweep run rebuilds the identical split without retraining.
struct FederatedSplit {
    std::vector<Dataset> client_shards;
    Dataset calibration;
};

FederatedSplit split_for_federation(const RunConfig& config, const Dataset& train);

struct FederatedResult {
    MlpModel model;  // final global backbone
    std::vector<RoundRecord> history;
    Dataset calibration;  // per-client holdouts pooled for conformal use
};

// Partitions the training data, holds out the calibration fraction of
// each client's shard, and runs the configured federated rounds.
FederatedResult train_federated(const RunConfig& config, const Dataset& train);

// Headline numbers kept in memory for tests; the full record lands in
// the output directory.
struct RunArtifacts {
    double accuracy = 0.0;  // backbone test accuracy (conformal never changes it)
    double tau = 0.0;
    UncertaintyReport report;
    std::vector<RoundRecord> history;
    std::string out_dir;
};

// One row of the coverage-versus-alpha sweep, recalibrated from the
// same held-out scores.
struct SweepRow {
    double alpha = 0.0;
    double tau = 0.0;
    double coverage = 0.0;
    double mean_set_size = 0.0;
};

// Everything the plot files need from a finished evaluation.
struct PlotBundle {
    std::vector<int> predicted;        // test-set argmax labels
    std::vector<double> widths;        // matching interval widths
    UncertaintyReport report;          // class-wise aggregates
    std::vector<SweepRow> sweep;
};

// Writes bounds.csv (index, prediction, lower = prediction - width/2,
// upper = prediction + width/2), class_uncertainty.csv (one row per
// class), and coverage_sweep.csv into the output directory.
void emit_plot_data(const PlotBundle& bundle, const std::string& out_dir);

// The full experiment: federate, calibrate, emit prediction sets,
// widths, the additive model's explanations, and every report file.
RunArtifacts run_experiment(const RunConfig& config);

// Re-runs calibration and the uncertainty reports against the saved
// backbone checkpoint, without retraining.
RunArtifacts run_calibrate(const RunConfig& config);

// Rebuilds contribution overlays from the saved additive model.
void run_explain(const RunConfig& config);

// Refreshes the coverage-versus-alpha sweep from the saved backbone.
void run_sweep(const RunConfig& config);

}  // namespace fednam
