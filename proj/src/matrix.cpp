#include "fednam/matrix.hpp"

#include <cmath>
#include <string>

#include "fednam/error.hpp"

namespace fednam {

namespace {

std::string shape_str(const Matrix& m) {
    return "[" + std::to_string(m.rows) + "x" + std::to_string(m.cols) + "]";
}

}  // namespace

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> values) {
    Matrix m;
    m.rows = values.size();
    m.cols = values.size() ? values.begin()->size() : 0;
    m.data.reserve(m.rows * m.cols);
    for (const auto& r : values) {
        if (r.size() != m.cols) {
            throw DimensionError("from_rows: ragged row, expected " +
                                 std::to_string(m.cols) + " got " + std::to_string(r.size()));
        }
        m.data.insert(m.data.end(), r.begin(), r.end());
    }
    return m;
}

bool Matrix::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) {
        throw DimensionError("matmul: shapes " + shape_str(a) + " and " + shape_str(b) +
                             " do not conform");
    }
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.data.data() + i * a.cols;
        double* crow = c.data.data() + i * c.cols;
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b.data.data() + k * b.cols;
            for (std::size_t j = 0; j < b.cols; ++j) {
                crow[j] += aik * brow[j];
            }
        }
    }
    return c;
}

Matrix matmul_transpose_a(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows) {
        throw DimensionError("matmul_transpose_a: shapes " + shape_str(a) + " and " +
                             shape_str(b) + " do not conform");
    }
    Matrix c(a.cols, b.cols);
    for (std::size_t n = 0; n < a.rows; ++n) {
        const double* arow = a.data.data() + n * a.cols;
        const double* brow = b.data.data() + n * b.cols;
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double ani = arow[i];
            if (ani == 0.0) continue;
            double* crow = c.data.data() + i * c.cols;
            for (std::size_t j = 0; j < b.cols; ++j) {
                crow[j] += ani * brow[j];
            }
        }
    }
    return c;
}

Matrix matmul_transpose_b(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols) {
        throw DimensionError("matmul_transpose_b: shapes " + shape_str(a) + " and " +
                             shape_str(b) + " do not conform");
    }
    Matrix c(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.data.data() + i * a.cols;
        double* crow = c.data.data() + i * c.cols;
        for (std::size_t j = 0; j < b.rows; ++j) {
            const double* brow = b.data.data() + j * b.cols;
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) {
                acc += arow[k] * brow[k];
            }
            crow[j] = acc;
        }
    }
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < a.cols; ++j) {
            t(j, i) = a(i, j);
        }
    }
    return t;
}

}  // namespace fednam
