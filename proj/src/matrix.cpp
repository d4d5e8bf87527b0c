#include "lyromel/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

#include <omp.h>

namespace lyromel {

bool Matrix::all_finite() const {
    for (double x : v_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

int effective_threads() {
    static const int cached = [] {
        int n = omp_get_max_threads();
        if (const char* env = std::getenv("LYROMEL_THREADS")) {
            int cap = std::atoi(env);
            if (cap > 0) n = std::min(n, cap);
        }
        return std::max(1, n);
    }();
    return cached;
}

namespace kernels {
namespace {

void check_mul(std::size_t inner_a, std::size_t inner_b, const char* op) {
    if (inner_a != inner_b) {
        throw ShapeError(std::string(op) + ": inner dimensions disagree (" +
                         std::to_string(inner_a) + " vs " + std::to_string(inner_b) + ")");
    }
}

// One output row of C = A·B: c_row += a_row · B, accumulated in fixed l order.
// Tiles of 16 columns keep the accumulator in registers.
void matmul_row(const double* arow, const Matrix& b, double* crow) {
    const std::size_t k = b.rows();
    const std::size_t p = b.cols();
    constexpr std::size_t kTile = 16;
    for (std::size_t j0 = 0; j0 < p; j0 += kTile) {
        const std::size_t jn = std::min(kTile, p - j0);
        double acc[kTile] = {0.0};
        if (jn == kTile) {
            for (std::size_t l = 0; l < k; ++l) {
                const double av = arow[l];
                const double* brow = b.row(l) + j0;
                for (std::size_t jj = 0; jj < kTile; ++jj) acc[jj] += av * brow[jj];
            }
        } else {
            for (std::size_t l = 0; l < k; ++l) {
                const double av = arow[l];
                const double* brow = b.row(l) + j0;
                for (std::size_t jj = 0; jj < jn; ++jj) acc[jj] += av * brow[jj];
            }
        }
        for (std::size_t jj = 0; jj < jn; ++jj) crow[j0 + jj] = acc[jj];
    }
}

// One output row of C = Aᵀ·B; row i of C reads column i of A.
void matmul_tn_row(const Matrix& a, std::size_t i, const Matrix& b, double* crow) {
    const std::size_t k = a.rows();
    const std::size_t p = b.cols();
    std::fill(crow, crow + p, 0.0);
    for (std::size_t l = 0; l < k; ++l) {
        const double av = a(l, i);
        const double* brow = b.row(l);
        for (std::size_t j = 0; j < p; ++j) crow[j] += av * brow[j];
    }
}

// One output row of C = A·Bᵀ: dot products of row pairs.
void matmul_nt_row(const double* arow, const Matrix& b, std::size_t k, double* crow) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
        const double* brow = b.row(j);
        double acc = 0.0;
        for (std::size_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
        crow[j] = acc;
    }
}

} // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    check_mul(a.cols(), b.rows(), "matmul");
    Matrix c(a.rows(), b.cols());
    const std::int64_t n = static_cast<std::int64_t>(a.rows());
#pragma omp parallel for schedule(static) num_threads(effective_threads())
    for (std::int64_t i = 0; i < n; ++i) {
        matmul_row(a.row(i), b, c.row(i));
    }
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    check_mul(a.rows(), b.rows(), "matmul_tn");
    Matrix c(a.cols(), b.cols());
    const std::int64_t n = static_cast<std::int64_t>(a.cols());
#pragma omp parallel for schedule(static) num_threads(effective_threads())
    for (std::int64_t i = 0; i < n; ++i) {
        matmul_tn_row(a, i, b, c.row(i));
    }
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    check_mul(a.cols(), b.cols(), "matmul_nt");
    Matrix c(a.rows(), b.rows());
    const std::int64_t n = static_cast<std::int64_t>(a.rows());
#pragma omp parallel for schedule(static) num_threads(effective_threads())
    for (std::int64_t i = 0; i < n; ++i) {
        matmul_nt_row(a.row(i), b, a.cols(), c.row(i));
    }
    return c;
}

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b) {
    check_mul(a.cols(), b.rows(), "matmul");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) matmul_row(a.row(i), b, c.row(i));
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    check_mul(a.rows(), b.rows(), "matmul_tn");
    Matrix c(a.cols(), b.cols());
    for (std::size_t i = 0; i < a.cols(); ++i) matmul_tn_row(a, i, b, c.row(i));
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    check_mul(a.cols(), b.cols(), "matmul_nt");
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) matmul_nt_row(a.row(i), b, a.cols(), c.row(i));
    return c;
}

} // namespace serial
} // namespace kernels

void add_inplace(Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw ShapeError("add_inplace: shape mismatch");
    double* pa = a.data();
    const double* pb = b.data();
    for (std::size_t i = 0; i < a.size(); ++i) pa[i] += pb[i];
}

void axpy_inplace(double alpha, const Matrix& x, Matrix& y) {
    if (!x.same_shape(y)) throw ShapeError("axpy_inplace: shape mismatch");
    double* py = y.data();
    const double* px = x.data();
    for (std::size_t i = 0; i < y.size(); ++i) py[i] += alpha * px[i];
}

} // namespace lyromel
