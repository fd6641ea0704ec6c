#include "fednam/param_vector.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "fednam/error.hpp"

namespace fednam {

namespace {

constexpr char kMagic[8] = {'F', 'N', 'A', 'M', 'P', 'V', '0', '1'};

void put_u64_le(std::ostream& out, std::uint64_t v) {
    std::array<unsigned char, 8> bytes;
    for (int i = 0; i < 8; ++i) {
        bytes[static_cast<std::size_t>(i)] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), 8);
}

std::uint64_t get_u64_le(std::istream& in) {
    std::array<unsigned char, 8> bytes;
    in.read(reinterpret_cast<char*>(bytes.data()), 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | bytes[static_cast<std::size_t>(i)];
    }
    return v;
}

}  // namespace

std::uint64_t hash_layout(const std::string& kind, const std::vector<int>& dims) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    auto mix = [&h](unsigned char byte) {
        h ^= byte;
        h *= 0x100000001B3ULL;
    };
    for (char c : kind) mix(static_cast<unsigned char>(c));
    for (int d : dims) {
        for (int i = 0; i < 4; ++i) {
            mix(static_cast<unsigned char>((static_cast<unsigned int>(d) >> (8 * i)) & 0xFF));
        }
    }
    return h;
}

void save_params(const ParamVector& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("save_params: cannot open " + path + " for writing");
    }
    out.write(kMagic, sizeof(kMagic));
    put_u64_le(out, params.layout_hash);
    put_u64_le(out, static_cast<std::uint64_t>(params.values.size()));
    for (double v : params.values) {
        put_u64_le(out, std::bit_cast<std::uint64_t>(v));
    }
    if (!out) {
        throw IoError("save_params: write failed for " + path);
    }
}

ParamVector load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("load_params: cannot open " + path);
    }
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw DataError("load_params: bad magic in " + path);
    }
    ParamVector params;
    params.layout_hash = get_u64_le(in);
    const std::uint64_t count = get_u64_le(in);
    if (!in) {
        throw DataError("load_params: truncated header in " + path);
    }
    params.values.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        params.values[i] = std::bit_cast<double>(get_u64_le(in));
    }
    if (!in) {
        throw DataError("load_params: truncated payload in " + path +
                        ", expected " + std::to_string(count) + " values");
    }
    return params;
}

}  // namespace fednam
