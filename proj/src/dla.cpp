#include "fednam/dla.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fednam/error.hpp"

namespace fednam {
namespace {

void check_config(const DlaConfig& cfg) {
    if (!(cfg.alpha > 0.0)) {
        throw ConfigError("dla: alpha must be > 0, got " + std::to_string(cfg.alpha));
    }
    if (!(cfg.beta >= 1.0)) {
        throw ConfigError("dla: beta must be >= 1, got " + std::to_string(cfg.beta));
    }
    if (!(cfg.epsilon > 0.0)) {
        throw ConfigError("dla: epsilon must be > 0, got " + std::to_string(cfg.epsilon));
    }
}

double median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

std::vector<double> dla_widths_from_magnitudes(std::span<const double> magnitudes,
                                               const DlaConfig& cfg) {
    check_config(cfg);
    if (magnitudes.empty()) {
        throw ConfigError("dla: empty batch");
    }

    const auto [lo_it, hi_it] = std::minmax_element(magnitudes.begin(), magnitudes.end());
    const double lo = *lo_it;
    const double span = *hi_it - lo + cfg.epsilon;

    std::vector<double> normalized(magnitudes.size());
    for (std::size_t i = 0; i < magnitudes.size(); ++i) {
        const double g = (magnitudes[i] - lo) / span;
        normalized[i] = std::isnan(g) ? 0.0 : g;
    }

    const double threshold = median(normalized);
    std::vector<double> widths(normalized.size());
    for (std::size_t i = 0; i < normalized.size(); ++i) {
        widths[i] = (normalized[i] > threshold) ? cfg.alpha * cfg.beta * (1.0 + normalized[i])
                                                : cfg.alpha * (1.0 + normalized[i]);
    }
    return widths;
}

std::vector<double> dla_widths(const Classifier& model, const Matrix& batch,
                               std::span<const int> labels, const DlaConfig& cfg) {
    check_config(cfg);
    if (batch.rows == 0) {
        throw ConfigError("dla: empty batch");
    }
    const Matrix grads = model.input_loss_gradients(batch, labels);
    std::vector<double> magnitudes(grads.rows);
    for (std::size_t i = 0; i < grads.rows; ++i) {
        double sum = 0.0;
        for (const double g : grads.row(i)) sum += std::abs(g);
        magnitudes[i] = sum / static_cast<double>(grads.cols);
    }
    return dla_widths_from_magnitudes(magnitudes, cfg);
}

std::vector<double> dla_widths(const Classifier& model, const Matrix& batch,
                               const DlaConfig& cfg) {
    const std::vector<int> pseudo = predict_labels(model, batch);
    return dla_widths(model, batch, pseudo, cfg);
}

}  // namespace fednam
