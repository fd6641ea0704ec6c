#include "fednam/mlp.hpp"

#include <cmath>
#include <string>

#include "fednam/error.hpp"
#include "fednam/numkit.hpp"

namespace fednam {

namespace {

// Hidden activations h_0..h_{L-1} (h_0 = input) and pre-activations
// z_1..z_L kept for the backward pass.
struct ForwardCache {
    std::vector<Matrix> activations;
    std::vector<Matrix> preacts;
};

}  // namespace

MlpModel::MlpModel(std::vector<int> dims) : dims_(std::move(dims)) {
    if (dims_.size() < 2) {
        throw ConfigError("MlpModel: need at least input and output dims, got " +
                          std::to_string(dims_.size()));
    }
    for (int d : dims_) {
        if (d <= 0) {
            throw ConfigError("MlpModel: non-positive layer width " + std::to_string(d));
        }
    }
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
        weights_.emplace_back(static_cast<std::size_t>(dims_[l]),
                              static_cast<std::size_t>(dims_[l + 1]));
        biases_.emplace_back(static_cast<std::size_t>(dims_[l + 1]), 0.0);
    }
}

MlpModel MlpModel::he_init(std::vector<int> dims, Rng& rng) {
    MlpModel model(std::move(dims));
    for (std::size_t l = 0; l < model.weights_.size(); ++l) {
        const double scale = std::sqrt(2.0 / static_cast<double>(model.dims_[l]));
        for (double& w : model.weights_[l].data) {
            w = scale * rng.normal();
        }
    }
    return model;
}

std::size_t MlpModel::param_count() const noexcept {
    std::size_t count = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        count += weights_[l].data.size() + biases_[l].size();
    }
    return count;
}

std::uint64_t MlpModel::layout_hash() const {
    return hash_layout("mlp", dims_);
}

static ForwardCache forward_cached(const std::vector<Matrix>& weights,
                                   const std::vector<std::vector<double>>& biases,
                                   const Matrix& batch) {
    ForwardCache cache;
    cache.activations.push_back(batch);
    for (std::size_t l = 0; l < weights.size(); ++l) {
        Matrix z = affine_forward(cache.activations.back(), weights[l], biases[l]);
        if (l + 1 < weights.size()) {
            cache.activations.push_back(relu(z));
        }
        cache.preacts.push_back(std::move(z));
    }
    return cache;
}

Matrix MlpModel::logits(const Matrix& batch) const {
    if (batch.cols != input_dim()) {
        throw DimensionError("MlpModel::logits: batch has " + std::to_string(batch.cols) +
                             " features, model expects " + std::to_string(input_dim()));
    }
    Matrix h = batch;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        h = affine_forward(h, weights_[l], biases_[l]);
        if (l + 1 < weights_.size()) {
            h = relu(h);
        }
    }
    return h;
}

Matrix MlpModel::logits_masked(const Matrix& batch, std::span<const Matrix> masks) const {
    if (masks.size() != weights_.size() - 1) {
        throw DimensionError("logits_masked: " + std::to_string(masks.size()) +
                             " masks for " + std::to_string(weights_.size() - 1) +
                             " hidden layers");
    }
    Matrix h = batch;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        h = affine_forward(h, weights_[l], biases_[l]);
        if (l + 1 < weights_.size()) {
            h = relu(h);
            const Matrix& mask = masks[l];
            if (mask.rows != h.rows || mask.cols != h.cols) {
                throw DimensionError("logits_masked: mask " + std::to_string(l) +
                                     " shape mismatch");
            }
            for (std::size_t i = 0; i < h.data.size(); ++i) {
                h.data[i] *= mask.data[i];
            }
        }
    }
    return h;
}

// Core backprop given d(scalar)/d(logits); shared by the cross-entropy
// path and backward_from_output.
static OutputBackwardResult backprop(const std::vector<Matrix>& weights,
                                     const std::vector<std::vector<double>>& biases,
                                     const ForwardCache& cache, Matrix delta,
                                     std::uint64_t layout_hash, std::size_t param_count) {
    OutputBackwardResult result;
    result.param_grads.layout_hash = layout_hash;
    result.param_grads.values.resize(param_count);

    // Gradient slots mirror the flat layout: weights then bias per layer.
    std::vector<std::size_t> offsets(weights.size());
    std::size_t offset = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        offsets[l] = offset;
        offset += weights[l].data.size() + biases[l].size();
    }

    for (std::size_t li = weights.size(); li-- > 0;) {
        const Matrix grad_w = matmul_transpose_a(cache.activations[li], delta);
        double* slot = result.param_grads.values.data() + offsets[li];
        for (std::size_t i = 0; i < grad_w.data.size(); ++i) {
            slot[i] = grad_w.data[i];
        }
        double* bias_slot = slot + grad_w.data.size();
        for (std::size_t j = 0; j < delta.cols; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < delta.rows; ++i) {
                acc += delta(i, j);
            }
            bias_slot[j] = acc;
        }

        Matrix upstream = matmul_transpose_b(delta, weights[li]);
        if (li > 0) {
            // Through the ReLU: zero where the pre-activation was <= 0.
            const Matrix& z = cache.preacts[li - 1];
            for (std::size_t i = 0; i < upstream.data.size(); ++i) {
                if (z.data[i] <= 0.0) upstream.data[i] = 0.0;
            }
        }
        delta = std::move(upstream);
    }
    result.input_grads = std::move(delta);
    return result;
}

BackwardResult MlpModel::backward(const Matrix& batch, std::span<const int> labels) const {
    if (batch.cols != input_dim()) {
        throw DimensionError("MlpModel::backward: batch has " + std::to_string(batch.cols) +
                             " features, model expects " + std::to_string(input_dim()));
    }
    const ForwardCache cache = forward_cached(weights_, biases_, batch);
    const Matrix probs = softmax(cache.preacts.back());
    const double loss = cross_entropy(probs, labels);
    if (!std::isfinite(loss)) {
        throw DivergenceError("MlpModel::backward: non-finite loss");
    }

    const double inv_n = 1.0 / static_cast<double>(batch.rows);
    Matrix delta = probs;  // d(loss)/d(logits) = (p - onehot)/n
    for (std::size_t i = 0; i < delta.rows; ++i) {
        delta(i, static_cast<std::size_t>(labels[i])) -= 1.0;
    }
    for (double& v : delta.data) {
        v *= inv_n;
    }

    OutputBackwardResult grads =
        backprop(weights_, biases_, cache, std::move(delta), layout_hash(), param_count());
    return BackwardResult{loss, std::move(grads.param_grads), std::move(grads.input_grads)};
}

OutputBackwardResult MlpModel::backward_from_output(const Matrix& batch,
                                                    const Matrix& output_grads) const {
    if (output_grads.rows != batch.rows || output_grads.cols != num_classes()) {
        throw DimensionError("backward_from_output: output_grads [" +
                             std::to_string(output_grads.rows) + "x" +
                             std::to_string(output_grads.cols) + "] does not match batch of " +
                             std::to_string(batch.rows) + " and " +
                             std::to_string(num_classes()) + " classes");
    }
    const ForwardCache cache = forward_cached(weights_, biases_, batch);
    return backprop(weights_, biases_, cache, output_grads, layout_hash(), param_count());
}

Matrix MlpModel::input_loss_gradients(const Matrix& batch, std::span<const int> labels) const {
    return backward(batch, labels).input_grads;
}

ParamVector MlpModel::to_params() const {
    ParamVector params;
    params.layout_hash = layout_hash();
    params.values.reserve(param_count());
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        params.values.insert(params.values.end(), weights_[l].data.begin(),
                             weights_[l].data.end());
        params.values.insert(params.values.end(), biases_[l].begin(), biases_[l].end());
    }
    return params;
}

void MlpModel::from_params(const ParamVector& params) {
    if (params.layout_hash != layout_hash()) {
        throw DataError("MlpModel::from_params: layout hash mismatch");
    }
    if (params.values.size() != param_count()) {
        throw DimensionError("MlpModel::from_params: expected " +
                             std::to_string(param_count()) + " values, got " +
                             std::to_string(params.values.size()));
    }
    std::size_t offset = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        for (double& w : weights_[l].data) {
            w = params.values[offset++];
        }
        for (double& b : biases_[l]) {
            b = params.values[offset++];
        }
    }
}

void MlpModel::apply_gradient_step(const ParamVector& grads, double lr) {
    if (grads.layout_hash != layout_hash()) {
        throw DataError("apply_gradient_step: layout hash mismatch");
    }
    std::size_t offset = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        for (double& w : weights_[l].data) {
            w -= lr * grads.values[offset++];
        }
        for (double& b : biases_[l]) {
            b -= lr * grads.values[offset++];
        }
    }
}

Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
    Matrix mask(rows, cols);
    const double scale = 1.0 / (1.0 - rate);
    for (double& v : mask.data) {
        v = (rng.uniform() < rate) ? 0.0 : scale;
    }
    return mask;
}

McDropoutResult mc_dropout_predict(const MlpModel& model, const Matrix& batch,
                                   int passes, double rate, Rng& rng) {
    if (passes < 1) {
        throw ConfigError("mc_dropout_predict: passes must be >= 1, got " +
                          std::to_string(passes));
    }
    if (rate < 0.0 || rate >= 1.0) {
        throw ConfigError("mc_dropout_predict: rate must lie in [0, 1), got " +
                          std::to_string(rate));
    }
    const std::size_t hidden_layers = model.layer_count() - 1;
    // Welford's online moments: identical passes (rate = 0, or M = 1)
    // yield a deviation of exactly zero, so std_probs is exactly zero
    // where the naive sum-of-squares formula would leave rounding noise.
    Matrix mean(batch.rows, model.num_classes());
    Matrix m2(batch.rows, model.num_classes());
    for (int m = 0; m < passes; ++m) {
        std::vector<Matrix> masks;
        masks.reserve(hidden_layers);
        for (std::size_t l = 0; l < hidden_layers; ++l) {
            masks.push_back(dropout_mask(batch.rows,
                                         static_cast<std::size_t>(model.dims()[l + 1]),
                                         rate, rng));
        }
        const Matrix probs = softmax(model.logits_masked(batch, masks));
        const double count = static_cast<double>(m + 1);
        for (std::size_t i = 0; i < probs.data.size(); ++i) {
            const double delta = probs.data[i] - mean.data[i];
            mean.data[i] += delta / count;
            m2.data[i] += delta * (probs.data[i] - mean.data[i]);
        }
    }
    McDropoutResult result{std::move(mean), Matrix(batch.rows, model.num_classes())};
    const double inv_m = 1.0 / static_cast<double>(passes);
    for (std::size_t i = 0; i < m2.data.size(); ++i) {
        result.std_probs.data[i] = std::sqrt(std::max(0.0, m2.data[i] * inv_m));
    }
    return result;
}

}  // namespace fednam
