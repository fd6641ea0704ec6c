#pragma once

#include <cstdint>

#include "fednam/dataset.hpp"

namespace fednam {

// The generative model behind a synthetic dataset: class-conditional
// Gaussians N(mean_k, sigma^2 I) whose means sit on a circle in the
// first two coordinates (all remaining coordinates at 0.5). Recording
// the parameters keeps the Bayes-optimal rule computable in tests.
struct SynthParams {
    Matrix class_means;  // [K x d]
    double sigma = 0.0;
    double separation = 0.0;  // nearest-neighbor mean distance in sigma units
};

struct SynthDataset {
    Dataset dataset;
    SynthParams params;
};

// Exchangeable classification draws with a known generative model.
// Labels are a shuffled round-robin over the classes, so counts are
// balanced and n = K yields exactly one sample per class; features are
// Gaussian draws clamped into [0,1]. Same seed, same dataset.
SynthDataset synth_classification(std::size_t n, std::size_t d, int num_classes,
                                  std::uint64_t seed, double separation = 4.0,
                                  double sigma = 0.08);

// The generative model's own best guess: the class whose mean is
// nearest (equal covariances make that the Bayes rule, clamping aside).
int bayes_classify(const SynthParams& params, std::span<const double> x);

}  // namespace fednam
