#include "cora/matrix.hpp"

#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace cora {

namespace {

std::string shape_of(std::size_t r, std::size_t c) {
    std::ostringstream os;
    os << r << "x" << c;
    return os.str();
}

void require_nonempty(const Matrix& m, const char* op) {
    if (m.empty()) {
        throw std::invalid_argument(std::string(op) + ": empty matrix");
    }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
    if (rows == 0 || cols == 0) {
        throw std::invalid_argument("Matrix: dimensions must be >= 1, got " + shape_of(rows, cols));
    }
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (rows == 0 || cols == 0) {
        throw std::invalid_argument("Matrix: dimensions must be >= 1, got " + shape_of(rows, cols));
    }
    if (data_.size() != rows * cols) {
        std::ostringstream os;
        os << "Matrix: data length " << data_.size() << " does not match shape " << shape_of(rows, cols);
        throw std::invalid_argument(os.str());
    }
    for (double v : data_) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("Matrix: non-finite entry rejected");
        }
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

std::string Matrix::shape_str() const { return shape_of(rows_, cols_); }

Matrix matmul(const Matrix& a, const Matrix& b) {
    require_nonempty(a, "matmul");
    require_nonempty(b, "matmul");
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matmul: dimension mismatch (" + a.shape_str() + ")*(" + b.shape_str() + ")");
    }
    Matrix c(a.rows(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* ci = c.row_ptr(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            const double* bk = b.row_ptr(k);
            for (std::size_t j = 0; j < n; ++j) {
                ci[j] += aik * bk[j];
            }
        }
    }
    return c;
}

Matrix transpose(const Matrix& m) {
    require_nonempty(m, "transpose");
    Matrix t(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            t(j, i) = m(i, j);
        }
    }
    return t;
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    require_nonempty(a, op);
    require_nonempty(b, op);
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch (" + a.shape_str() + ") vs (" +
                                    b.shape_str() + ")");
    }
}

}  // namespace

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix c = a;
    add_in_place(c, b);
    return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "sub");
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) {
        c.data()[i] -= b.data()[i];
    }
    return c;
}

Matrix scale(const Matrix& m, double s) {
    require_nonempty(m, "scale");
    Matrix c = m;
    for (double& v : c.data()) {
        v *= s;
    }
    return c;
}

double frobenius_norm(const Matrix& m) {
    require_nonempty(m, "frobenius_norm");
    double sum = 0.0;
    for (double v : m.data()) {
        sum += v * v;
    }
    return std::sqrt(sum);
}

void add_in_place(Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add_in_place");
    for (std::size_t i = 0; i < a.size(); ++i) {
        a.data()[i] += b.data()[i];
    }
}

void axpy_in_place(Matrix& a, double s, const Matrix& b) {
    require_same_shape(a, b, "axpy_in_place");
    for (std::size_t i = 0; i < a.size(); ++i) {
        a.data()[i] += s * b.data()[i];
    }
}

void scale_in_place(Matrix& m, double s) {
    require_nonempty(m, "scale_in_place");
    for (double& v : m.data()) {
        v *= s;
    }
}

double max_abs(const Matrix& m) {
    double best = 0.0;
    for (double v : m.data()) {
        best = std::max(best, std::fabs(v));
    }
    return best;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "max_abs_diff");
    double best = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        best = std::max(best, std::fabs(a.data()[i] - b.data()[i]));
    }
    return best;
}

bool bit_equal(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        return false;
    }
    return std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

Matrix vstack(const std::vector<const Matrix*>& parts) {
    if (parts.empty()) {
        throw std::invalid_argument("vstack: no parts");
    }
    const std::size_t cols = parts.front()->cols();
    std::size_t rows = 0;
    for (const Matrix* p : parts) {
        require_nonempty(*p, "vstack");
        if (p->cols() != cols) {
            throw std::invalid_argument("vstack: column mismatch (" + p->shape_str() + ")");
        }
        rows += p->rows();
    }
    Matrix out(rows, cols);
    std::size_t at = 0;
    for (const Matrix* p : parts) {
        std::memcpy(out.row_ptr(at), p->data().data(), p->size() * sizeof(double));
        at += p->rows();
    }
    return out;
}

Matrix row_slice(const Matrix& m, std::size_t row_begin, std::size_t row_end) {
    require_nonempty(m, "row_slice");
    if (row_begin >= row_end || row_end > m.rows()) {
        std::ostringstream os;
        os << "row_slice: invalid range [" << row_begin << ", " << row_end << ") for " << m.shape_str();
        throw std::invalid_argument(os.str());
    }
    Matrix out(row_end - row_begin, m.cols());
    std::memcpy(out.data().data(), m.row_ptr(row_begin), out.size() * sizeof(double));
    return out;
}

}  // namespace cora
