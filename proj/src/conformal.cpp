#include "fednam/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fednam/classifier.hpp"
#include "fednam/error.hpp"

namespace fednam {

std::vector<double> nonconformity(const Matrix& probs, std::span<const int> labels) {
    if (labels.size() != probs.rows) {
        throw DimensionError("nonconformity: " + std::to_string(probs.rows) +
                             " probability rows but " + std::to_string(labels.size()) +
                             " labels");
    }
    std::vector<double> scores(probs.rows);
    for (std::size_t i = 0; i < probs.rows; ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= probs.cols) {
            throw DataError("nonconformity: label " + std::to_string(y) + " at row " +
                            std::to_string(i) + " is outside [0, " +
                            std::to_string(probs.cols) + ")");
        }
        scores[i] = 1.0 - probs(i, static_cast<std::size_t>(y));
    }
    return scores;
}

CalibrationResult calibrate(std::vector<double> scores, double alpha, QuantileRule rule) {
    if (scores.empty()) {
        throw DataError("calibrate: no calibration scores");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw ConfigError("calibrate: alpha must lie in (0,1), got " + std::to_string(alpha));
    }
    std::sort(scores.begin(), scores.end());
    const double n = static_cast<double>(scores.size());
    const double target = (rule == QuantileRule::finite_sample)
                              ? (n + 1.0) * (1.0 - alpha)
                              : n * (1.0 - alpha);
    std::size_t rank = static_cast<std::size_t>(std::ceil(target));
    rank = std::clamp<std::size_t>(rank, 1, scores.size());

    CalibrationResult result;
    result.tau = scores[rank - 1];
    result.alpha = alpha;
    result.n = scores.size();
    result.rule = rule;
    result.scores = std::move(scores);
    return result;
}

std::vector<int> prediction_set(std::span<const double> probs, double tau,
                                bool force_argmax) {
    std::vector<int> set;
    for (std::size_t y = 0; y < probs.size(); ++y) {
        if (1.0 - probs[y] <= tau) set.push_back(static_cast<int>(y));
    }
    if (force_argmax && set.empty() && !probs.empty()) {
        std::size_t best = 0;
        for (std::size_t y = 1; y < probs.size(); ++y) {
            if (probs[y] > probs[best]) best = y;
        }
        set.push_back(static_cast<int>(best));
    }
    return set;
}

double coverage_audit(const std::vector<std::vector<int>>& sets,
                      std::span<const int> labels) {
    if (sets.size() != labels.size()) {
        throw DimensionError("coverage_audit: " + std::to_string(sets.size()) +
                             " sets but " + std::to_string(labels.size()) + " labels");
    }
    if (sets.empty()) return 0.0;
    std::size_t covered = 0;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        if (std::find(sets[i].begin(), sets[i].end(), labels[i]) != sets[i].end()) {
            ++covered;
        }
    }
    return static_cast<double>(covered) / static_cast<double>(sets.size());
}

UncertaintyReport classwise_uncertainty(std::span<const double> widths,
                                        std::span<const int> predicted_labels,
                                        int num_classes) {
    if (widths.size() != predicted_labels.size()) {
        throw DimensionError("classwise_uncertainty: " + std::to_string(widths.size()) +
                             " widths but " + std::to_string(predicted_labels.size()) +
                             " predictions");
    }
    if (num_classes < 1) {
        throw ConfigError("classwise_uncertainty: num_classes must be >= 1");
    }
    const std::size_t k = static_cast<std::size_t>(num_classes);
    std::vector<double> sums(k, 0.0);
    UncertaintyReport report;
    report.class_counts.assign(k, 0);
    double total = 0.0;
    for (std::size_t i = 0; i < widths.size(); ++i) {
        const int c = predicted_labels[i];
        if (c < 0 || static_cast<std::size_t>(c) >= k) {
            throw DataError("classwise_uncertainty: predicted class " + std::to_string(c) +
                            " at row " + std::to_string(i) + " is outside [0, " +
                            std::to_string(num_classes) + ")");
        }
        sums[static_cast<std::size_t>(c)] += widths[i];
        report.class_counts[static_cast<std::size_t>(c)] += 1;
        total += widths[i];
    }
    report.class_mean_width.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        if (report.class_counts[c] > 0) {
            report.class_mean_width[c] = sums[c] / static_cast<double>(report.class_counts[c]);
        }
    }
    report.mean_width = widths.empty() ? 0.0 : total / static_cast<double>(widths.size());
    return report;
}

}  // namespace fednam
