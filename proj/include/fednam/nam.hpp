#pragma once

#include <span>
#include <vector>

#include "fednam/classifier.hpp"
#include "fednam/mlp.hpp"

namespace fednam {

enum class ContributionMode { value, gradient };

// Additive classifier: one small network per input feature mapping the
// scalar feature to K class scores, plus a global bias.
//
//   logits(x) = bias + sum_j subnet_j(x_j)
//
// Additivity is structural, so per-feature contributions for the
// predicted class are exact, not an attribution estimate.
class NamModel : public Classifier {
public:
    // subnet_hidden are the hidden widths of each per-feature network,
    // e.g. {16, 16}; every subnet is {1, hidden..., classes}.
    NamModel(int features, int classes, std::vector<int> subnet_hidden);

    static NamModel he_init(int features, int classes, std::vector<int> subnet_hidden,
                            Rng& rng);

    std::size_t input_dim() const override { return subnets_.size(); }
    std::size_t num_classes() const override { return bias_.size(); }
    const std::vector<int>& subnet_dims() const { return subnets_.front().dims(); }
    std::size_t param_count() const noexcept;
    std::uint64_t layout_hash() const;

    Matrix logits(const Matrix& batch) const override;

    // Loss is mean cross-entropy at the summed logits; subnet gradients
    // can be computed on `threads` workers since subnets are disjoint.
    BackwardResult backward(const Matrix& batch, std::span<const int> labels,
                            int threads = 1) const;

    Matrix input_loss_gradients(const Matrix& batch,
                                std::span<const int> labels) const override;

    // Per-feature contribution scores [n x d] for each sample's
    // predicted class. value mode returns subnet_j(x_j)[predicted];
    // gradient mode returns d(logit_predicted)/d(x_j).
    Matrix contributions(const Matrix& batch, ContributionMode mode) const;

    ParamVector to_params() const;
    void from_params(const ParamVector& params);
    void apply_gradient_step(const ParamVector& grads, double lr);

    const MlpModel& subnet(std::size_t j) const { return subnets_[j]; }
    MlpModel& mutable_subnet(std::size_t j) { return subnets_[j]; }
    std::span<const double> bias() const { return bias_; }
    std::span<double> mutable_bias() { return bias_; }

private:
    Matrix feature_column(const Matrix& batch, std::size_t j) const;

    std::vector<MlpModel> subnets_;
    std::vector<double> bias_;
};

// Plain minibatch SGD on mean cross-entropy; batches are drawn by a
// seeded shuffle each epoch. Returns the mean loss per epoch.
std::vector<double> train_nam(NamModel& model, const Matrix& features,
                              std::span<const int> labels, int epochs, double lr,
                              int batch_size, Rng& rng, int threads = 1);

}  // namespace fednam
