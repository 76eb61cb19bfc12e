#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace cora {

// Dense row-major matrix of doubles. The single numeric carrier for the
// whole project: weights, adapters, bases, gradients.
class Matrix {
public:
    Matrix() = default;  // 0x0 placeholder; not valid for any operation
    Matrix(std::size_t rows, std::size_t cols);  // zero-filled
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }
    const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    std::string shape_str() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& m, double s);
double frobenius_norm(const Matrix& m);

// Entrywise helpers shared by tests and training code.
void add_in_place(Matrix& a, const Matrix& b);
void axpy_in_place(Matrix& a, double s, const Matrix& b);  // a += s*b
void scale_in_place(Matrix& m, double s);
double max_abs(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);
bool bit_equal(const Matrix& a, const Matrix& b);

// Vertical concatenation, top to bottom. All parts must share a column count.
Matrix vstack(const std::vector<const Matrix*>& parts);

// Rows [row_begin, row_end) as a new matrix.
Matrix row_slice(const Matrix& m, std::size_t row_begin, std::size_t row_end);

}  // namespace cora
