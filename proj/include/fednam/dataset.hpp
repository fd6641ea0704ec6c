#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fednam/matrix.hpp"

namespace fednam {

// A labeled classification dataset with features scaled into [0,1].
struct Dataset {
    Matrix features;          // [n x d], entries in [0,1]
    std::vector<int> labels;  // n entries in [0, num_classes)
    int num_classes = 0;
    // Set when samples are images (e.g. 28x28 digits); feature j maps to
    // pixel (j / width, j % width).
    std::optional<std::pair<std::size_t, std::size_t>> image_shape;
    std::string source;  // where the data came from, for reports

    std::size_t size() const noexcept { return features.rows; }
    std::size_t dim() const noexcept { return features.cols; }
};

// Enforces the Dataset invariants: at least one sample, features in
// [0,1], labels in range, label count matching the feature rows.
void validate_dataset(const Dataset& dataset);

// New dataset holding the given rows, in order. Indices out of range
// raise a data error.
Dataset subset(const Dataset& dataset, const std::vector<std::size_t>& indices);

// Disjoint client shards covering every sample index exactly once.
struct PartitionPlan {
    int clients = 0;
    std::vector<std::vector<std::size_t>> shards;
    std::uint64_t seed = 0;
};

// Seeded shuffle followed by a contiguous split. Shard sizes differ by
// at most one; when n is not divisible by the client count, the later
// clients absorb one extra sample each.
PartitionPlan partition_iid(const Dataset& dataset, int clients, std::uint64_t seed);

}  // namespace fednam
