#pragma once

#include <functional>
#include <span>
#include <vector>

#include "fednam/matrix.hpp"

namespace fednam {

// out[i,j] = sum_k input[i,k] * weights[k,j] + bias[j]
Matrix affine_forward(const Matrix& input, const Matrix& weights, std::span<const double> bias);

// Row-wise softmax with max subtraction; rows sum to 1 within 1e-12.
Matrix softmax(const Matrix& logits);

// Mean of -ln(max(p[i, label_i], 1e-12)) over rows.
// Probabilities below the clamp never produce -inf.
double cross_entropy(const Matrix& probs, std::span<const int> labels);

Matrix relu(const Matrix& x);

// Scalar function of a flat parameter/input vector, for gradient checking.
using ScalarFn = std::function<double(std::span<const double>)>;

// Central-difference check of an analytic gradient.
// Returns max over checked coordinates of |numeric - analytic| / (|analytic| + 1e-8).
// `coords` selects which coordinates to probe; empty checks all of them.
// h must lie in [1e-7, 1e-3].
double grad_check(const ScalarFn& f, std::span<const double> x,
                  std::span<const double> analytic_grad, double h,
                  std::span<const std::size_t> coords = {});

}  // namespace fednam
