#pragma once

#include <string>

#include "fednam/dataset.hpp"

namespace fednam {

// Reads a rectangular numeric CSV with a header row. The named column
// supplies integer class labels; every other column becomes a feature,
// min-max normalized into [0,1] (constant columns map to zero).
Dataset read_csv_tabular(const std::string& path, const std::string& label_column);

// Writes features plus a final label column, full double precision.
// Reading the file back recovers the dataset exactly when every feature
// column already spans [0,1], since normalization is then the identity.
void write_csv(const Dataset& dataset, const std::string& path);

}  // namespace fednam
