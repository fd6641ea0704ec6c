#include "fednam/classifier.hpp"

#include "fednam/numkit.hpp"

namespace fednam {

Matrix predict_probs(const Classifier& model, const Matrix& batch) {
    return softmax(model.logits(batch));
}

std::vector<int> predict_labels(const Classifier& model, const Matrix& batch) {
    return argmax_rows(model.logits(batch));
}

std::vector<int> argmax_rows(const Matrix& scores) {
    std::vector<int> labels(scores.rows);
    for (std::size_t i = 0; i < scores.rows; ++i) {
        const auto row = scores.row(i);
        std::size_t best = 0;
        for (std::size_t j = 1; j < row.size(); ++j) {
            if (row[j] > row[best]) best = j;
        }
        labels[i] = static_cast<int>(best);
    }
    return labels;
}

}  // namespace fednam
