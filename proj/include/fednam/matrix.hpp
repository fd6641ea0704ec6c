#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace fednam {

// Dense row-major matrix of doubles. The one value type every module
// exchanges; treated as immutable once handed across an interface.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // rows * cols, row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> values);

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

    bool all_finite() const;

    bool operator==(const Matrix& other) const = default;
};

// C = A * B. Shapes must conform; throws DimensionError naming both shapes.
Matrix matmul(const Matrix& a, const Matrix& b);

// C = A^T * B with A of shape [n x r]: result [r x cols(B)].
Matrix matmul_transpose_a(const Matrix& a, const Matrix& b);

// C = A * B^T with B of shape [m x c]: result [rows(A) x m].
Matrix matmul_transpose_b(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

}  // namespace fednam
