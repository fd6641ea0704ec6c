#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fednam/classifier.hpp"
#include "fednam/nam.hpp"

namespace fednam {

// Where a contribution map's scores came from. NAM maps differentiate
// (or read off) the predicted-class logit, which for an additive model
// depends on one subnet per feature; the backbone map differentiates
// the loss, which couples every feature through the softmax.
enum class ContributionSource { nam_value, nam_gradient, backbone_gradient };

struct ContributionMap {
    std::vector<double> scores;  // one per feature
    ContributionSource source = ContributionSource::backbone_gradient;
    std::optional<std::pair<std::size_t, std::size_t>> image_shape;
};

// Boolean feature mask selecting the most contributing entries.
struct PixelMask {
    std::vector<bool> selected;
    double fraction = 0.0;
    bool signed_ranking = false;  // rank by raw value instead of |value|

    std::size_t popcount() const;
    std::vector<std::size_t> indices() const;  // selected positions, ascending
};

// Marks the ceil(fraction * d) features with the largest |C_j| (or
// largest signed C_j when requested); ties fall to the lower index.
PixelMask top_fraction_mask(std::span<const double> contributions, double fraction,
                            bool signed_ranking = false);

// Per-feature |d(loss)/dx_j| for one labeled sample.
ContributionMap sensitivity_map(const Classifier& model, std::span<const double> sample,
                                int label);

// Contribution map for one sample from an additive model, tagged with
// the requested mode. Scores follow NamModel::contributions.
ContributionMap nam_contribution_map(const NamModel& model, std::span<const double> sample,
                                     ContributionMode mode);

// Writes <base>.pgm (the image), <base>.ppm (the image with selected
// pixels flagged in red), and <base>.mask.csv (selected indices).
void export_overlay(std::span<const double> image, std::size_t height, std::size_t width,
                    const PixelMask& mask, const std::string& base_path);

}  // namespace fednam
