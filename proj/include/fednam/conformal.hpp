#pragma once

#include <optional>
#include <span>
#include <vector>

#include "fednam/matrix.hpp"

namespace fednam {

// Which order statistic becomes the conformal threshold. The
// finite-sample rank ceil((n+1)(1-alpha)) is the one that carries the
// coverage guarantee; the plain empirical quantile ceil(n(1-alpha)) is
// kept for comparison runs.
enum class QuantileRule { finite_sample, plain };

struct CalibrationResult {
    std::vector<double> scores;  // sorted ascending
    double alpha = 0.0;
    double tau = 0.0;
    std::size_t n = 0;
    QuantileRule rule = QuantileRule::finite_sample;
};

// Nonconformity of each sample: S_i = 1 - p[i, y_i]. Low scores mean
// the model put mass on the right class.
std::vector<double> nonconformity(const Matrix& probs, std::span<const int> labels);

// Threshold tau from held-out scores at miscoverage level alpha.
CalibrationResult calibrate(std::vector<double> scores, double alpha,
                            QuantileRule rule = QuantileRule::finite_sample);

// Classes whose nonconformity clears the threshold: {y : 1 - p_y <= tau}.
// The set may be empty unless force_argmax inserts the model's top class.
std::vector<int> prediction_set(std::span<const double> probs, double tau,
                                bool force_argmax = false);

// Fraction of samples whose true label landed in their prediction set.
double coverage_audit(const std::vector<std::vector<int>>& sets,
                      std::span<const int> labels);

// Aggregate uncertainty for one evaluation run. Classes that received
// no predictions report an empty optional rather than a fake zero.
struct UncertaintyReport {
    std::vector<std::optional<double>> class_mean_width;  // U_c, size K
    std::vector<std::size_t> class_counts;                // predictions per class
    double mean_width = 0.0;
    double coverage = 0.0;
    double mean_set_size = 0.0;
    double seconds_calibrate = 0.0;  // filled by the pipeline
    double seconds_widths = 0.0;
};

// Per-class mean interval widths keyed by predicted class; the
// remaining report fields are left for the caller to fill.
UncertaintyReport classwise_uncertainty(std::span<const double> widths,
                                        std::span<const int> predicted_labels,
                                        int num_classes);

}  // namespace fednam
