#include "fednam/csv_data.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include "fednam/error.hpp"

namespace fednam {
namespace {

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream stream(line);
    while (std::getline(stream, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& path) {
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (end[-1] == ' ' || end[-1] == '\t' || end[-1] == '\r')) --end;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end || begin == end) {
        throw DataError("CSV file '" + path + "' row " + std::to_string(row) +
                        ": cell '" + cell + "' is not numeric");
    }
    return value;
}

}  // namespace

Dataset read_csv_tabular(const std::string& path, const std::string& label_column) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open CSV file '" + path + "'");
    }

    std::string line;
    if (!std::getline(in, line)) {
        throw DataError("CSV file '" + path + "' is empty");
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<std::string> header = split_row(line);

    std::size_t label_index = header.size();
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] == label_column) label_index = j;
    }
    if (label_index == header.size()) {
        throw DataError("CSV file '" + path + "' has no column named '" + label_column + "'");
    }

    std::vector<std::vector<double>> rows;
    std::size_t row_number = 1;  // header is row 1
    while (std::getline(in, line)) {
        ++row_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_row(line);
        if (cells.size() != header.size()) {
            throw DataError("CSV file '" + path + "' row " + std::to_string(row_number) +
                            " has " + std::to_string(cells.size()) + " cells, header has " +
                            std::to_string(header.size()));
        }
        std::vector<double> values(cells.size());
        for (std::size_t j = 0; j < cells.size(); ++j) {
            values[j] = parse_cell(cells[j], row_number, path);
        }
        rows.push_back(std::move(values));
    }
    if (rows.empty()) {
        throw DataError("CSV file '" + path + "' has a header but no data rows");
    }

    const std::size_t n = rows.size();
    const std::size_t d = header.size() - 1;
    Dataset dataset;
    dataset.features = Matrix(n, d);
    dataset.labels.resize(n);
    dataset.source = path;

    int max_label = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double raw = rows[i][label_index];
        const double rounded = std::round(raw);
        if (std::abs(raw - rounded) > 1e-9 || rounded < 0.0) {
            throw DataError("CSV file '" + path + "' row " + std::to_string(i + 2) +
                            ": label value " + std::to_string(raw) +
                            " is not a non-negative integer");
        }
        dataset.labels[i] = static_cast<int>(rounded);
        max_label = std::max(max_label, dataset.labels[i]);
        std::size_t out_j = 0;
        for (std::size_t j = 0; j < header.size(); ++j) {
            if (j == label_index) continue;
            dataset.features(i, out_j++) = rows[i][j];
        }
    }
    dataset.num_classes = max_label + 1;

    // Min-max per column; a constant column carries no information and
    // maps to zero rather than dividing by zero.
    for (std::size_t j = 0; j < d; ++j) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            lo = std::min(lo, dataset.features(i, j));
            hi = std::max(hi, dataset.features(i, j));
        }
        const double span = hi - lo;
        for (std::size_t i = 0; i < n; ++i) {
            dataset.features(i, j) =
                (span == 0.0) ? 0.0 : (dataset.features(i, j) - lo) / span;
        }
    }
    validate_dataset(dataset);
    return dataset;
}

void write_csv(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    for (std::size_t j = 0; j < dataset.features.cols; ++j) {
        out << "f" << j << ",";
    }
    out << "label\n";
    char buf[32];
    for (std::size_t i = 0; i < dataset.features.rows; ++i) {
        for (std::size_t j = 0; j < dataset.features.cols; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", dataset.features(i, j));
            out << buf << ",";
        }
        out << dataset.labels[i] << "\n";
    }
    if (!out) {
        throw IoError("write failure on '" + path + "'");
    }
}

}  // namespace fednam
