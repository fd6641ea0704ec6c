#include "fednam/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fednam/error.hpp"

namespace fednam {

namespace {
constexpr double kProbClamp = 1e-12;
}

Matrix affine_forward(const Matrix& input, const Matrix& weights, std::span<const double> bias) {
    if (input.cols != weights.rows || bias.size() != weights.cols) {
        throw DimensionError("affine_forward: input [" + std::to_string(input.rows) + "x" +
                             std::to_string(input.cols) + "], weights [" +
                             std::to_string(weights.rows) + "x" + std::to_string(weights.cols) +
                             "], bias [" + std::to_string(bias.size()) + "] do not conform");
    }
    Matrix out = matmul(input, weights);
    for (std::size_t i = 0; i < out.rows; ++i) {
        double* row = out.data.data() + i * out.cols;
        for (std::size_t j = 0; j < out.cols; ++j) {
            row[j] += bias[j];
        }
    }
    return out;
}

Matrix softmax(const Matrix& logits) {
    Matrix out(logits.rows, logits.cols);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const auto row = logits.row(i);
        const double max_val = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (std::size_t j = 0; j < logits.cols; ++j) {
            const double e = std::exp(row[j] - max_val);
            out(i, j) = e;
            sum += e;
        }
        for (std::size_t j = 0; j < logits.cols; ++j) {
            out(i, j) /= sum;
        }
    }
    return out;
}

double cross_entropy(const Matrix& probs, std::span<const int> labels) {
    if (labels.size() != probs.rows) {
        throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                             std::to_string(probs.rows) + " rows");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < probs.rows; ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= probs.cols) {
            throw DataError("cross_entropy: label " + std::to_string(y) + " out of range [0, " +
                            std::to_string(probs.cols) + ") at row " + std::to_string(i));
        }
        total += -std::log(std::max(probs(i, static_cast<std::size_t>(y)), kProbClamp));
    }
    return total / static_cast<double>(probs.rows);
}

Matrix relu(const Matrix& x) {
    Matrix out = x;
    for (double& v : out.data) {
        v = std::max(v, 0.0);
    }
    return out;
}

double grad_check(const ScalarFn& f, std::span<const double> x,
                  std::span<const double> analytic_grad, double h,
                  std::span<const std::size_t> coords) {
    if (x.size() != analytic_grad.size()) {
        throw DimensionError("grad_check: x has " + std::to_string(x.size()) +
                             " coordinates, analytic gradient has " +
                             std::to_string(analytic_grad.size()));
    }
    if (h < 1e-7 || h > 1e-3) {
        throw ConfigError("grad_check: step " + std::to_string(h) +
                          " outside [1e-7, 1e-3]");
    }

    std::vector<std::size_t> all;
    if (coords.empty()) {
        all.resize(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) all[i] = i;
        coords = all;
    }

    std::vector<double> probe(x.begin(), x.end());
    double max_rel = 0.0;
    for (std::size_t idx : coords) {
        const double orig = probe[idx];
        probe[idx] = orig + h;
        const double f_plus = f(probe);
        probe[idx] = orig - h;
        const double f_minus = f(probe);
        probe[idx] = orig;
        if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
            throw DivergenceError("grad_check: non-finite function value at coordinate " +
                                  std::to_string(idx));
        }
        const double numeric = (f_plus - f_minus) / (2.0 * h);
        const double rel = std::abs(numeric - analytic_grad[idx]) /
                           (std::abs(analytic_grad[idx]) + 1e-8);
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

}  // namespace fednam
