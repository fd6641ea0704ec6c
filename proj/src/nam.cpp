#include "fednam/nam.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "fednam/error.hpp"
#include "fednam/numkit.hpp"
#include "fednam/parallel.hpp"

namespace fednam {

namespace {

std::vector<int> subnet_shape(int classes, const std::vector<int>& hidden) {
    std::vector<int> dims;
    dims.reserve(hidden.size() + 2);
    dims.push_back(1);
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(classes);
    return dims;
}

}  // namespace

NamModel::NamModel(int features, int classes, std::vector<int> subnet_hidden) {
    if (features < 1 || classes < 2) {
        throw ConfigError("NamModel: need features >= 1 and classes >= 2, got " +
                          std::to_string(features) + " and " + std::to_string(classes));
    }
    const std::vector<int> dims = subnet_shape(classes, subnet_hidden);
    subnets_.reserve(static_cast<std::size_t>(features));
    for (int j = 0; j < features; ++j) {
        subnets_.emplace_back(dims);
    }
    bias_.assign(static_cast<std::size_t>(classes), 0.0);
}

NamModel NamModel::he_init(int features, int classes, std::vector<int> subnet_hidden,
                           Rng& rng) {
    NamModel model(features, classes, subnet_hidden);
    const std::vector<int> dims = subnet_shape(classes, subnet_hidden);
    for (auto& subnet : model.subnets_) {
        subnet = MlpModel::he_init(dims, rng);
    }
    return model;
}

std::size_t NamModel::param_count() const noexcept {
    return bias_.size() + subnets_.size() * subnets_.front().param_count();
}

std::uint64_t NamModel::layout_hash() const {
    std::vector<int> shape;
    shape.push_back(static_cast<int>(subnets_.size()));
    const auto& dims = subnets_.front().dims();
    shape.insert(shape.end(), dims.begin(), dims.end());
    return hash_layout("nam", shape);
}

Matrix NamModel::feature_column(const Matrix& batch, std::size_t j) const {
    Matrix column(batch.rows, 1);
    for (std::size_t i = 0; i < batch.rows; ++i) {
        column(i, 0) = batch(i, j);
    }
    return column;
}

Matrix NamModel::logits(const Matrix& batch) const {
    if (batch.cols != input_dim()) {
        throw DimensionError("NamModel::logits: batch has " + std::to_string(batch.cols) +
                             " features, model expects " + std::to_string(input_dim()));
    }
    Matrix out(batch.rows, num_classes());
    for (std::size_t i = 0; i < out.rows; ++i) {
        for (std::size_t k = 0; k < bias_.size(); ++k) {
            out(i, k) = bias_[k];
        }
    }
    for (std::size_t j = 0; j < subnets_.size(); ++j) {
        const Matrix part = subnets_[j].logits(feature_column(batch, j));
        for (std::size_t i = 0; i < out.data.size(); ++i) {
            out.data[i] += part.data[i];
        }
    }
    return out;
}

BackwardResult NamModel::backward(const Matrix& batch, std::span<const int> labels,
                                  int threads) const {
    const Matrix scores = logits(batch);
    const Matrix probs = softmax(scores);
    const double loss = cross_entropy(probs, labels);
    if (!std::isfinite(loss)) {
        throw DivergenceError("NamModel::backward: non-finite loss");
    }

    Matrix delta = probs;
    const double inv_n = 1.0 / static_cast<double>(batch.rows);
    for (std::size_t i = 0; i < delta.rows; ++i) {
        delta(i, static_cast<std::size_t>(labels[i])) -= 1.0;
    }
    for (double& v : delta.data) {
        v *= inv_n;
    }

    BackwardResult result;
    result.loss = loss;
    result.param_grads.layout_hash = layout_hash();
    result.param_grads.values.resize(param_count());
    result.input_grads = Matrix(batch.rows, input_dim());

    // Bias sits first in the flat layout.
    for (std::size_t k = 0; k < bias_.size(); ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < delta.rows; ++i) {
            acc += delta(i, k);
        }
        result.param_grads.values[k] = acc;
    }

    const std::size_t per_subnet = subnets_.front().param_count();
    parallel_for(subnets_.size(), threads, [&](std::size_t j) {
        const OutputBackwardResult sub =
            subnets_[j].backward_from_output(feature_column(batch, j), delta);
        double* slot = result.param_grads.values.data() + bias_.size() + j * per_subnet;
        for (std::size_t i = 0; i < per_subnet; ++i) {
            slot[i] = sub.param_grads.values[i];
        }
        for (std::size_t i = 0; i < batch.rows; ++i) {
            result.input_grads(i, j) = sub.input_grads(i, 0);
        }
    });
    return result;
}

Matrix NamModel::input_loss_gradients(const Matrix& batch,
                                      std::span<const int> labels) const {
    return backward(batch, labels).input_grads;
}

Matrix NamModel::contributions(const Matrix& batch, ContributionMode mode) const {
    const std::vector<int> predicted = argmax_rows(logits(batch));
    Matrix contrib(batch.rows, input_dim());

    if (mode == ContributionMode::value) {
        for (std::size_t j = 0; j < subnets_.size(); ++j) {
            const Matrix out = subnets_[j].logits(feature_column(batch, j));
            for (std::size_t i = 0; i < batch.rows; ++i) {
                contrib(i, j) = out(i, static_cast<std::size_t>(predicted[i]));
            }
        }
        return contrib;
    }

    // gradient mode: d(logit of the predicted class)/d(x_j), obtained by
    // seeding each subnet's backprop with one-hot rows.
    Matrix seed(batch.rows, num_classes());
    for (std::size_t i = 0; i < batch.rows; ++i) {
        seed(i, static_cast<std::size_t>(predicted[i])) = 1.0;
    }
    for (std::size_t j = 0; j < subnets_.size(); ++j) {
        const OutputBackwardResult sub =
            subnets_[j].backward_from_output(feature_column(batch, j), seed);
        for (std::size_t i = 0; i < batch.rows; ++i) {
            contrib(i, j) = sub.input_grads(i, 0);
        }
    }
    return contrib;
}

ParamVector NamModel::to_params() const {
    ParamVector params;
    params.layout_hash = layout_hash();
    params.values.reserve(param_count());
    params.values.insert(params.values.end(), bias_.begin(), bias_.end());
    for (const auto& subnet : subnets_) {
        const ParamVector sub = subnet.to_params();
        params.values.insert(params.values.end(), sub.values.begin(), sub.values.end());
    }
    return params;
}

void NamModel::from_params(const ParamVector& params) {
    if (params.layout_hash != layout_hash()) {
        throw DataError("NamModel::from_params: layout hash mismatch");
    }
    if (params.values.size() != param_count()) {
        throw DimensionError("NamModel::from_params: expected " +
                             std::to_string(param_count()) + " values, got " +
                             std::to_string(params.values.size()));
    }
    std::size_t offset = 0;
    for (double& b : bias_) {
        b = params.values[offset++];
    }
    const std::size_t per_subnet = subnets_.front().param_count();
    for (auto& subnet : subnets_) {
        ParamVector sub;
        sub.layout_hash = subnet.layout_hash();
        sub.values.assign(params.values.begin() + static_cast<std::ptrdiff_t>(offset),
                          params.values.begin() + static_cast<std::ptrdiff_t>(offset + per_subnet));
        subnet.from_params(sub);
        offset += per_subnet;
    }
}

void NamModel::apply_gradient_step(const ParamVector& grads, double lr) {
    if (grads.layout_hash != layout_hash()) {
        throw DataError("NamModel::apply_gradient_step: layout hash mismatch");
    }
    ParamVector params = to_params();
    for (std::size_t i = 0; i < params.values.size(); ++i) {
        params.values[i] -= lr * grads.values[i];
    }
    from_params(params);
}

std::vector<double> train_nam(NamModel& model, const Matrix& features,
                              std::span<const int> labels, int epochs, double lr,
                              int batch_size, Rng& rng, int threads) {
    if (epochs < 1) {
        throw ConfigError("train_nam: epochs must be >= 1");
    }
    if (batch_size < 1) {
        throw ConfigError("train_nam: batch_size must be >= 1");
    }
    const std::size_t n = features.rows;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<double> epoch_losses;
    epoch_losses.reserve(static_cast<std::size_t>(epochs));
    for (int epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
            const std::size_t end = std::min(n, start + static_cast<std::size_t>(batch_size));
            Matrix batch(end - start, features.cols);
            std::vector<int> batch_labels(end - start);
            for (std::size_t i = start; i < end; ++i) {
                const std::size_t src = order[i];
                for (std::size_t j = 0; j < features.cols; ++j) {
                    batch(i - start, j) = features(src, j);
                }
                batch_labels[i - start] = labels[src];
            }
            const BackwardResult grads = model.backward(batch, batch_labels, threads);
            model.apply_gradient_step(grads.param_grads, lr);
            loss_sum += grads.loss * static_cast<double>(end - start);
        }
        epoch_losses.push_back(loss_sum / static_cast<double>(n));
    }
    return epoch_losses;
}

}  // namespace fednam
