#include "fednam/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "fednam/error.hpp"
#include "fednam/pnm.hpp"

namespace fednam {

std::size_t PixelMask::popcount() const {
    return static_cast<std::size_t>(std::count(selected.begin(), selected.end(), true));
}

std::vector<std::size_t> PixelMask::indices() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < selected.size(); ++j) {
        if (selected[j]) out.push_back(j);
    }
    return out;
}

PixelMask top_fraction_mask(std::span<const double> contributions, double fraction,
                            bool signed_ranking) {
    if (contributions.empty()) {
        throw DataError("top_fraction_mask: no contributions");
    }
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw ConfigError("top_fraction_mask: fraction must lie in (0,1], got " +
                          std::to_string(fraction));
    }
    const std::size_t d = contributions.size();
    const std::size_t keep = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(d)));

    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto key = [&](std::size_t j) {
        return signed_ranking ? contributions[j] : std::abs(contributions[j]);
    };
    // stable_sort keeps equal keys in ascending index order.
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return key(a) > key(b); });

    PixelMask mask;
    mask.fraction = fraction;
    mask.signed_ranking = signed_ranking;
    mask.selected.assign(d, false);
    for (std::size_t r = 0; r < keep; ++r) mask.selected[order[r]] = true;
    return mask;
}

ContributionMap sensitivity_map(const Classifier& model, std::span<const double> sample,
                                int label) {
    Matrix batch(1, sample.size());
    batch.data.assign(sample.begin(), sample.end());
    const std::vector<int> labels{label};
    const Matrix grads = model.input_loss_gradients(batch, labels);

    ContributionMap map;
    map.source = ContributionSource::backbone_gradient;
    map.scores.resize(grads.cols);
    for (std::size_t j = 0; j < grads.cols; ++j) {
        const double g = std::abs(grads(0, j));
        if (!std::isfinite(g)) {
            throw DivergenceError("sensitivity_map: non-finite gradient at feature " +
                                  std::to_string(j));
        }
        map.scores[j] = g;
    }
    return map;
}

ContributionMap nam_contribution_map(const NamModel& model, std::span<const double> sample,
                                     ContributionMode mode) {
    Matrix batch(1, sample.size());
    batch.data.assign(sample.begin(), sample.end());
    const Matrix contrib = model.contributions(batch, mode);

    ContributionMap map;
    map.source = (mode == ContributionMode::value) ? ContributionSource::nam_value
                                                   : ContributionSource::nam_gradient;
    map.scores.assign(contrib.row(0).begin(), contrib.row(0).end());
    for (std::size_t j = 0; j < map.scores.size(); ++j) {
        if (!std::isfinite(map.scores[j])) {
            throw DivergenceError("nam_contribution_map: non-finite contribution at feature " +
                                  std::to_string(j));
        }
    }
    return map;
}

void export_overlay(std::span<const double> image, std::size_t height, std::size_t width,
                    const PixelMask& mask, const std::string& base_path) {
    if (mask.selected.size() != image.size()) {
        throw DimensionError("export_overlay: mask covers " +
                             std::to_string(mask.selected.size()) + " features, image has " +
                             std::to_string(image.size()));
    }
    write_pgm(base_path + ".pgm", image, height, width);
    write_ppm(base_path + ".ppm", image, height, width, mask.selected);

    const std::string csv_path = base_path + ".mask.csv";
    std::ofstream out(csv_path);
    if (!out) {
        throw IoError("cannot open '" + csv_path + "' for writing");
    }
    out << "index\n";
    for (const std::size_t j : mask.indices()) out << j << "\n";
    if (!out) {
        throw IoError("write failure on '" + csv_path + "'");
    }
}

}  // namespace fednam
