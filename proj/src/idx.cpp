#include "fednam/idx.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <vector>

#include "fednam/error.hpp"

namespace fednam {
namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::vector<unsigned char> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open IDX file '" + path + "'");
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw IoError("read failure on IDX file '" + path + "'");
    }
    return bytes;
}

std::uint32_t read_u32_be(const std::vector<unsigned char>& bytes, std::size_t offset,
                          const std::string& path) {
    if (offset + 4 > bytes.size()) {
        throw DataError("IDX file '" + path + "' is truncated: header needs " +
                        std::to_string(offset + 4) + " bytes, file has " +
                        std::to_string(bytes.size()));
    }
    return (static_cast<std::uint32_t>(bytes[offset]) << 24) |
           (static_cast<std::uint32_t>(bytes[offset + 1]) << 16) |
           (static_cast<std::uint32_t>(bytes[offset + 2]) << 8) |
           static_cast<std::uint32_t>(bytes[offset + 3]);
}

std::string hex_magic(std::uint32_t magic) {
    char buf[11];
    std::snprintf(buf, sizeof(buf), "0x%08x", magic);
    return buf;
}

}  // namespace

Dataset read_idx(const std::string& images_path, const std::string& labels_path) {
    const auto image_bytes = read_file_bytes(images_path);
    const auto label_bytes = read_file_bytes(labels_path);

    const std::uint32_t image_magic = read_u32_be(image_bytes, 0, images_path);
    if (image_magic != kImagesMagic) {
        throw DataError("IDX image file '" + images_path + "' has magic " +
                        hex_magic(image_magic) + ", expected " + hex_magic(kImagesMagic));
    }
    const std::uint32_t label_magic = read_u32_be(label_bytes, 0, labels_path);
    if (label_magic != kLabelsMagic) {
        throw DataError("IDX label file '" + labels_path + "' has magic " +
                        hex_magic(label_magic) + ", expected " + hex_magic(kLabelsMagic));
    }

    const std::uint32_t image_count = read_u32_be(image_bytes, 4, images_path);
    const std::uint32_t rows = read_u32_be(image_bytes, 8, images_path);
    const std::uint32_t cols = read_u32_be(image_bytes, 12, images_path);
    const std::uint32_t label_count = read_u32_be(label_bytes, 4, labels_path);

    if (image_count != label_count) {
        throw DataError("IDX pair mismatch: '" + images_path + "' holds " +
                        std::to_string(image_count) + " images but '" + labels_path +
                        "' holds " + std::to_string(label_count) + " labels");
    }

    const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
    const std::size_t expected_image_bytes = 16 + static_cast<std::size_t>(image_count) * pixels;
    if (image_bytes.size() < expected_image_bytes) {
        throw DataError("IDX image file '" + images_path + "' is truncated: expected " +
                        std::to_string(expected_image_bytes) + " bytes, got " +
                        std::to_string(image_bytes.size()));
    }
    const std::size_t expected_label_bytes = 8 + static_cast<std::size_t>(label_count);
    if (label_bytes.size() < expected_label_bytes) {
        throw DataError("IDX label file '" + labels_path + "' is truncated: expected " +
                        std::to_string(expected_label_bytes) + " bytes, got " +
                        std::to_string(label_bytes.size()));
    }

    Dataset dataset;
    dataset.features = Matrix(image_count, pixels);
    dataset.labels.resize(image_count);
    dataset.image_shape = {static_cast<std::size_t>(rows), static_cast<std::size_t>(cols)};
    dataset.source = images_path;

    for (std::size_t i = 0; i < dataset.features.data.size(); ++i) {
        dataset.features.data[i] = static_cast<double>(image_bytes[16 + i]) / 255.0;
    }
    int max_label = 0;
    for (std::size_t i = 0; i < image_count; ++i) {
        dataset.labels[i] = static_cast<int>(label_bytes[8 + i]);
        max_label = std::max(max_label, dataset.labels[i]);
    }
    dataset.num_classes = max_label + 1;
    validate_dataset(dataset);
    return dataset;
}

}  // namespace fednam
