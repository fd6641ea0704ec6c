#pragma once

#include <span>
#include <vector>

#include "fednam/classifier.hpp"
#include "fednam/matrix.hpp"

namespace fednam {

// Dynamic level adjustment: per-sample interval widths scaled by how
// sensitive the loss is to that sample's inputs. Samples whose
// normalized gradient magnitude exceeds the batch median get their
// width boosted by beta.
struct DlaConfig {
    double alpha = 0.1;     // base interval width, > 0
    double beta = 1.5;      // confidence boost for sensitive samples, >= 1
    double epsilon = 1e-8;  // keeps the normalization finite, > 0
};

// The width rule applied to raw per-sample gradient magnitudes:
//   g <- (g - min) / (max - min + epsilon), NaN -> 0
//   width_i = alpha * beta * (1 + g_i)  if g_i > median(g)   (strictly)
//           = alpha * (1 + g_i)         otherwise
// Every width lands in [alpha, 2*alpha*beta]. Exposed separately so
// tests can drive it with hand-picked magnitudes.
std::vector<double> dla_widths_from_magnitudes(std::span<const double> magnitudes,
                                               const DlaConfig& cfg);

// Full pipeline step: per-sample magnitude = mean over features of
// |d(loss)/dX|, then the width rule above.
std::vector<double> dla_widths(const Classifier& model, const Matrix& batch,
                               std::span<const int> labels, const DlaConfig& cfg);

// Inference-time variant: true labels are unknown, so the loss is taken
// at the model's own argmax predictions (pseudo-labels).
std::vector<double> dla_widths(const Classifier& model, const Matrix& batch,
                               const DlaConfig& cfg);

}  // namespace fednam
