#pragma once

#include <string>

#include "fednam/dataset.hpp"

namespace fednam {

// Reads a paired IDX image/label file set (the MNIST container format:
// big-endian headers, one unsigned byte per pixel or label). Pixels are
// scaled by 1/255 into [0,1] and the image shape is recorded.
Dataset read_idx(const std::string& images_path, const std::string& labels_path);

}  // namespace fednam
