#pragma once

#include <cstddef>
#include <vector>

#include "lyromel/errors.hpp"

namespace lyromel {

// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), v_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return v_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return v_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return v_[r * cols_ + c]; }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }
    double* row(std::size_t r) { return v_.data() + r * cols_; }
    const double* row(std::size_t r) const { return v_.data() + r * cols_; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
    bool all_finite() const;

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.v_ == b.v_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> v_;
};

// Worker thread count for the parallel kernels: OpenMP's maximum, optionally
// capped by the LYROMEL_THREADS environment variable.
int effective_threads();

namespace kernels {

// Parallel kernels partition output rows across threads and keep every inner
// accumulation serial, so results are bit-identical to the serial reference
// for any thread count.

Matrix matmul(const Matrix& a, const Matrix& b);     // a (n×k) · b (k×p)
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // aᵀ · b
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a · bᵀ

namespace serial {
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
} // namespace serial

} // namespace kernels

void add_inplace(Matrix& a, const Matrix& b);
void axpy_inplace(double alpha, const Matrix& x, Matrix& y);  // y += alpha·x

} // namespace lyromel
