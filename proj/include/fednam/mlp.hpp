#pragma once

#include <span>
#include <vector>

#include "fednam/classifier.hpp"
#include "fednam/matrix.hpp"
#include "fednam/param_vector.hpp"
#include "fednam/rng.hpp"

namespace fednam {

// Gradients of mean cross-entropy from one backward pass.
struct BackwardResult {
    double loss = 0.0;
    ParamVector param_grads;
    Matrix input_grads;  // [n x d]
};

// Backprop result when the caller supplies d(scalar)/d(logits) itself.
struct OutputBackwardResult {
    ParamVector param_grads;
    Matrix input_grads;
};

// Plain fully connected classifier: affine layers with ReLU on the
// hidden ones, raw logits at the output. Backward is hand-written;
// the flat parameter layout is weights then bias per layer, in order.
class MlpModel : public Classifier {
public:
    // dims = {input, hidden..., output}; parameters start at zero.
    explicit MlpModel(std::vector<int> dims);

    // Weights ~ N(0, sqrt(2/fan_in)) drawn layer by layer in row-major
    // order; biases zero.
    static MlpModel he_init(std::vector<int> dims, Rng& rng);

    std::size_t input_dim() const override { return static_cast<std::size_t>(dims_.front()); }
    std::size_t num_classes() const override { return static_cast<std::size_t>(dims_.back()); }
    const std::vector<int>& dims() const noexcept { return dims_; }
    std::size_t layer_count() const noexcept { return weights_.size(); }
    std::size_t param_count() const noexcept;
    std::uint64_t layout_hash() const;

    Matrix logits(const Matrix& batch) const override;

    BackwardResult backward(const Matrix& batch, std::span<const int> labels) const;

    // Backprop of an arbitrary scalar whose gradient at the logits is
    // `output_grads` [n x K]. Used by the additive model, whose loss is
    // taken at the sum of subnet outputs.
    OutputBackwardResult backward_from_output(const Matrix& batch,
                                              const Matrix& output_grads) const;

    Matrix input_loss_gradients(const Matrix& batch,
                                std::span<const int> labels) const override;

    ParamVector to_params() const;
    void from_params(const ParamVector& params);

    // params -= lr * grads, layout-checked.
    void apply_gradient_step(const ParamVector& grads, double lr);

    // Forward pass with the given dropout masks applied to each hidden
    // activation (one [n x width] matrix per hidden layer).
    Matrix logits_masked(const Matrix& batch, std::span<const Matrix> masks) const;

    const Matrix& layer_weights(std::size_t l) const { return weights_[l]; }
    const std::vector<double>& layer_bias(std::size_t l) const { return biases_[l]; }
    Matrix& mutable_layer_weights(std::size_t l) { return weights_[l]; }
    std::vector<double>& mutable_layer_bias(std::size_t l) { return biases_[l]; }

private:
    std::vector<int> dims_;
    std::vector<Matrix> weights_;             // [dims_[l] x dims_[l+1]]
    std::vector<std::vector<double>> biases_;  // [dims_[l+1]]
};

struct McDropoutResult {
    Matrix mean_probs;
    Matrix std_probs;  // population standard deviation over passes
};

// Entries are 0 with probability `rate`, else 1/(1-rate); drawn in
// row-major order. Shared with tests that enumerate passes explicitly.
Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng);

// M stochastic forward passes with inverted-scaling dropout on hidden
// activations. Masks are drawn pass by pass, layer by layer, row-major,
// all from `rng`, so a fixed seed fixes every pass. rate = 0 reduces to
// the deterministic model.
McDropoutResult mc_dropout_predict(const MlpModel& model, const Matrix& batch,
                                   int passes, double rate, Rng& rng);

}  // namespace fednam
