#include "fednam/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "fednam/error.hpp"
#include "fednam/rng.hpp"

namespace fednam {

SynthDataset synth_classification(std::size_t n, std::size_t d, int num_classes,
                                  std::uint64_t seed, double separation, double sigma) {
    if (num_classes < 1) {
        throw ConfigError("synth_classification: num_classes must be >= 1, got " +
                          std::to_string(num_classes));
    }
    if (d < 1) {
        throw ConfigError("synth_classification: dimension must be >= 1");
    }
    if (n < static_cast<std::size_t>(num_classes)) {
        throw ConfigError("synth_classification: need n >= num_classes, got n = " +
                          std::to_string(n) + ", num_classes = " +
                          std::to_string(num_classes));
    }
    if (sigma <= 0.0 || separation < 0.0) {
        throw ConfigError("synth_classification: sigma must be > 0 and separation >= 0");
    }

    const std::size_t k = static_cast<std::size_t>(num_classes);

    // Means on a circle of radius r in the first two coordinates, chosen
    // so adjacent means sit `separation * sigma` apart. A single class
    // sits at the center; one dimension keeps only the cosine leg.
    SynthParams params;
    params.sigma = sigma;
    params.separation = separation;
    params.class_means = Matrix(k, d);
    const double radius =
        (k > 1) ? separation * sigma / (2.0 * std::sin(std::numbers::pi / static_cast<double>(k)))
                : 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) /
                             static_cast<double>(k);
        for (std::size_t j = 0; j < d; ++j) params.class_means(c, j) = 0.5;
        params.class_means(c, 0) += radius * std::cos(angle);
        if (d > 1) params.class_means(c, 1) += radius * std::sin(angle);
    }

    // Shuffled round-robin labels: balanced counts, uniform marginals,
    // and n = num_classes gives a permutation of 0..K-1.
    Rng rng(seed);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % k);
    rng.shuffle(labels);

    Dataset dataset;
    dataset.features = Matrix(n, d);
    dataset.labels = std::move(labels);
    dataset.num_classes = num_classes;
    dataset.source = "synthetic(seed=" + std::to_string(seed) + ")";
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = static_cast<std::size_t>(dataset.labels[i]);
        for (std::size_t j = 0; j < d; ++j) {
            const double raw = params.class_means(c, j) + sigma * rng.normal();
            dataset.features(i, j) = std::clamp(raw, 0.0, 1.0);
        }
    }
    validate_dataset(dataset);
    return {std::move(dataset), std::move(params)};
}

int bayes_classify(const SynthParams& params, std::span<const double> x) {
    if (x.size() != params.class_means.cols) {
        throw DimensionError("bayes_classify: sample has " + std::to_string(x.size()) +
                             " features, generative model has " +
                             std::to_string(params.class_means.cols));
    }
    int best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < params.class_means.rows; ++c) {
        double dist = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double diff = x[j] - params.class_means(c, j);
            dist += diff * diff;
        }
        if (dist < best_dist) {
            best_dist = dist;
            best = static_cast<int>(c);
        }
    }
    return best;
}

}  // namespace fednam
