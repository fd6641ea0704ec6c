#include "fednam/dataset.hpp"

#include <numeric>
#include <string>

#include "fednam/error.hpp"
#include "fednam/rng.hpp"

namespace fednam {

void validate_dataset(const Dataset& dataset) {
    if (dataset.features.rows == 0) {
        throw DataError("dataset '" + dataset.source + "' has no samples");
    }
    if (dataset.labels.size() != dataset.features.rows) {
        throw DataError("dataset '" + dataset.source + "' has " +
                        std::to_string(dataset.features.rows) + " feature rows but " +
                        std::to_string(dataset.labels.size()) + " labels");
    }
    if (dataset.num_classes < 1) {
        throw DataError("dataset '" + dataset.source + "' has num_classes " +
                        std::to_string(dataset.num_classes));
    }
    for (std::size_t i = 0; i < dataset.features.data.size(); ++i) {
        const double v = dataset.features.data[i];
        if (!(v >= 0.0 && v <= 1.0)) {
            throw DataError("dataset '" + dataset.source + "' feature entry " +
                            std::to_string(i) + " = " + std::to_string(v) +
                            " lies outside [0,1]");
        }
    }
    for (std::size_t i = 0; i < dataset.labels.size(); ++i) {
        const int y = dataset.labels[i];
        if (y < 0 || y >= dataset.num_classes) {
            throw DataError("dataset '" + dataset.source + "' label " + std::to_string(y) +
                            " at row " + std::to_string(i) + " is outside [0, " +
                            std::to_string(dataset.num_classes) + ")");
        }
    }
    if (dataset.image_shape) {
        const auto [h, w] = *dataset.image_shape;
        if (h * w != dataset.features.cols) {
            throw DataError("dataset '" + dataset.source + "' image shape " +
                            std::to_string(h) + "x" + std::to_string(w) +
                            " does not match feature dimension " +
                            std::to_string(dataset.features.cols));
        }
    }
}

Dataset subset(const Dataset& dataset, const std::vector<std::size_t>& indices) {
    Dataset out;
    out.features = Matrix(indices.size(), dataset.features.cols);
    out.labels.resize(indices.size());
    out.num_classes = dataset.num_classes;
    out.image_shape = dataset.image_shape;
    out.source = dataset.source;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const std::size_t src = indices[i];
        if (src >= dataset.features.rows) {
            throw DataError("subset index " + std::to_string(src) +
                            " is out of range for " + std::to_string(dataset.features.rows) +
                            " samples");
        }
        const auto row = dataset.features.row(src);
        std::copy(row.begin(), row.end(), out.features.row(i).begin());
        out.labels[i] = dataset.labels[src];
    }
    return out;
}

PartitionPlan partition_iid(const Dataset& dataset, int clients, std::uint64_t seed) {
    const std::size_t n = dataset.size();
    if (clients < 1) {
        throw ConfigError("partition_iid: client count must be >= 1, got " +
                          std::to_string(clients));
    }
    if (static_cast<std::size_t>(clients) > n) {
        throw DataError("partition_iid: cannot split " + std::to_string(n) +
                        " samples across " + std::to_string(clients) + " clients");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);

    PartitionPlan plan;
    plan.clients = clients;
    plan.seed = seed;
    plan.shards.resize(static_cast<std::size_t>(clients));

    // Contiguous split of the shuffled order; the last (n mod clients)
    // clients take one extra sample so sizes never differ by more than one.
    const std::size_t k = static_cast<std::size_t>(clients);
    const std::size_t base = n / k;
    const std::size_t extra = n % k;
    std::size_t cursor = 0;
    for (std::size_t c = 0; c < k; ++c) {
        const std::size_t take = base + (c >= k - extra ? 1 : 0);
        plan.shards[c].assign(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                              order.begin() + static_cast<std::ptrdiff_t>(cursor + take));
        cursor += take;
    }
    return plan;
}

}  // namespace fednam
