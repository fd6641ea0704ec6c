#pragma once

#include <span>
#include <vector>

#include "fednam/matrix.hpp"

namespace fednam {

// Minimal surface the conformal and interpretation layers need from a
// trained model: raw scores plus the loss gradient with respect to the
// inputs. Both backbone and additive models implement it.
class Classifier {
public:
    virtual ~Classifier() = default;

    virtual std::size_t input_dim() const = 0;
    virtual std::size_t num_classes() const = 0;

    virtual Matrix logits(const Matrix& batch) const = 0;

    // d(mean cross-entropy)/d(input), shape [n x d].
    virtual Matrix input_loss_gradients(const Matrix& batch,
                                        std::span<const int> labels) const = 0;
};

Matrix predict_probs(const Classifier& model, const Matrix& batch);
std::vector<int> predict_labels(const Classifier& model, const Matrix& batch);
std::vector<int> argmax_rows(const Matrix& scores);

}  // namespace fednam
