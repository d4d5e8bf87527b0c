// Compares the OpenMP kernels against their serial references: throughput and
// bit-equality on the shapes the training loop actually uses.

#include <chrono>
#include <cstdio>
#include <vector>

#include <omp.h>

#include "lyromel/eval.hpp"
#include "lyromel/matrix.hpp"
#include "lyromel/rng.hpp"

using namespace lyromel;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
    return m;
}

template <typename F>
double time_seconds(F&& f, int reps) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) f();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count() / reps;
}

void bench_matmul(std::size_t n, std::size_t k, std::size_t p, int reps) {
    Rng rng(42);
    const Matrix a = random_matrix(n, k, rng);
    const Matrix b = random_matrix(k, p, rng);

    Matrix c_serial, c_omp;
    const double t_serial = time_seconds([&] { c_serial = kernels::serial::matmul(a, b); }, reps);
    const double t_omp = time_seconds([&] { c_omp = kernels::matmul(a, b); }, reps);
    const double flops = 2.0 * static_cast<double>(n) * k * p;
    std::printf("matmul %4zu x %4zu x %3zu  serial %8.3f ms (%6.2f GFLOP/s)  omp %8.3f ms "
                "(%6.2f GFLOP/s)  speedup %.2fx  bit-equal %s\n",
                n, k, p, 1e3 * t_serial, flops / t_serial / 1e9, 1e3 * t_omp,
                flops / t_omp / 1e9, t_serial / t_omp, c_serial == c_omp ? "yes" : "NO");
}

void bench_mmd(std::size_t n, std::size_t dim, int reps) {
    Rng rng(7);
    const Matrix x = random_matrix(n, dim, rng);
    const Matrix y = random_matrix(n, dim, rng);
    double v_serial = 0, v_omp = 0;
    const double t_serial = time_seconds([&] { v_serial = serial::mmd2_unbiased(x, y, 1.0); }, reps);
    const double t_omp = time_seconds([&] { v_omp = mmd2_unbiased(x, y, 1.0); }, reps);
    std::printf("mmd2   n=%4zu dim=%3zu    serial %8.3f ms                  omp %8.3f ms "
                "                 speedup %.2fx  bit-equal %s\n",
                n, dim, 1e3 * t_serial, 1e3 * t_omp, t_serial / t_omp,
                v_serial == v_omp ? "yes" : "NO");
}

void bench_shuffles(std::size_t n, std::size_t m, std::size_t shuffles) {
    Rng rng(11);
    const Matrix d = random_matrix(n, m, rng);
    const Matrix g = random_matrix(n, m, rng);
    const double t = time_seconds([&] { conditioning_distance(d, g, shuffles, 5); }, 1);
    std::printf("conditioning %zux%zu, %zu shuffles: %.3f s\n", n, m, shuffles, t);
}

} // namespace

int main() {
    std::printf("threads: %d\n", effective_threads());
    // LSTM gate shapes (batch 16 and 32) at the published width
    bench_matmul(1600, 800, 16, 20);
    bench_matmul(1600, 800, 32, 10);
    bench_matmul(400, 453, 32, 50);
    bench_mmd(500, 60, 3);
    bench_shuffles(1000, 20, 2000);
    return 0;
}
