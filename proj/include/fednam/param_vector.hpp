#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fednam {

// Flat parameter vector, the unit of client -> server exchange.
// layout_hash fingerprints the producing model's shape; unflattening
// into a model with a different shape is rejected.
struct ParamVector {
    std::vector<double> values;
    std::uint64_t layout_hash = 0;

    std::size_t size() const noexcept { return values.size(); }
};

// FNV-1a over a shape description; used for ParamVector::layout_hash.
std::uint64_t hash_layout(const std::string& kind, const std::vector<int>& dims);

// Checkpoint file: 8-byte magic "FNAMPV01", layout hash (8 bytes LE),
// count (8 bytes LE), then count little-endian 64-bit floats.
void save_params(const ParamVector& params, const std::string& path);
ParamVector load_params(const std::string& path);

}  // namespace fednam
