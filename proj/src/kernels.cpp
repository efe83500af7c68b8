#include "arvae/kernels.hpp"

#include <cassert>
#include <cmath>

namespace arvae::kernels {

namespace {
// Below this many multiply-adds the parallel region is not worth spawning.
constexpr long long kParGrain = 1 << 15;
}  // namespace

namespace serial {

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             int m, int n, int k) {
    assert(a.size() >= static_cast<std::size_t>(m) * k);
    assert(b.size() >= static_cast<std::size_t>(n) * k);
    assert(c.size() >= static_cast<std::size_t>(m) * n);
    for (int i = 0; i < m; ++i) {
        const double* ai = &a[static_cast<std::size_t>(i) * k];
        for (int j = 0; j < n; ++j) {
            const double* bj = &b[static_cast<std::size_t>(j) * k];
            double sum = 0.0;
            for (int p = 0; p < k; ++p) sum += ai[p] * bj[p];
            c[static_cast<std::size_t>(i) * n + j] = sum;
        }
    }
}

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             int m, int n, int k) {
    for (int i = 0; i < m; ++i) {
        double* ci = &c[static_cast<std::size_t>(i) * n];
        for (int j = 0; j < n; ++j) ci[j] = 0.0;
        for (int p = 0; p < k; ++p) {
            const double aip = a[static_cast<std::size_t>(i) * k + p];
            const double* bp = &b[static_cast<std::size_t>(p) * n];
            for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             int m, int n1, int n2) {
    for (int i = 0; i < n1; ++i) {
        double* ci = &c[static_cast<std::size_t>(i) * n2];
        for (int j = 0; j < n2; ++j) ci[j] = 0.0;
        for (int r = 0; r < m; ++r) {
            const double ari = a[static_cast<std::size_t>(r) * n1 + i];
            const double* br = &b[static_cast<std::size_t>(r) * n2];
            for (int j = 0; j < n2; ++j) ci[j] += ari * br[j];
        }
    }
}

void add_row_vector(std::span<double> y, std::span<const double> b, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        double* yr = &y[static_cast<std::size_t>(r) * cols];
        for (int j = 0; j < cols; ++j) yr[j] += b[j];
    }
}

void col_sums(std::span<const double> a, std::span<double> out, int rows, int cols) {
    for (int j = 0; j < cols; ++j) out[j] = 0.0;
    for (int r = 0; r < rows; ++r) {
        const double* ar = &a[static_cast<std::size_t>(r) * cols];
        for (int j = 0; j < cols; ++j) out[j] += ar[j];
    }
}

void adam_update(std::span<double> param, std::span<const double> grad,
                 std::span<double> m, std::span<double> v,
                 double lr, double beta1, double beta2, double eps, long long step) {
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    const std::size_t n = param.size();
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace serial

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             int m, int n, int k) {
    const long long work = static_cast<long long>(m) * n * k;
#pragma omp parallel for schedule(static) if (work > kParGrain)
    for (int i = 0; i < m; ++i) {
        const double* ai = &a[static_cast<std::size_t>(i) * k];
        for (int j = 0; j < n; ++j) {
            const double* bj = &b[static_cast<std::size_t>(j) * k];
            double sum = 0.0;
            for (int p = 0; p < k; ++p) sum += ai[p] * bj[p];
            c[static_cast<std::size_t>(i) * n + j] = sum;
        }
    }
}

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             int m, int n, int k) {
    const long long work = static_cast<long long>(m) * n * k;
#pragma omp parallel for schedule(static) if (work > kParGrain)
    for (int i = 0; i < m; ++i) {
        double* ci = &c[static_cast<std::size_t>(i) * n];
        for (int j = 0; j < n; ++j) ci[j] = 0.0;
        for (int p = 0; p < k; ++p) {
            const double aip = a[static_cast<std::size_t>(i) * k + p];
            const double* bp = &b[static_cast<std::size_t>(p) * n];
            for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             int m, int n1, int n2) {
    const long long work = static_cast<long long>(m) * n1 * n2;
#pragma omp parallel for schedule(static) if (work > kParGrain)
    for (int i = 0; i < n1; ++i) {
        double* ci = &c[static_cast<std::size_t>(i) * n2];
        for (int j = 0; j < n2; ++j) ci[j] = 0.0;
        for (int r = 0; r < m; ++r) {
            const double ari = a[static_cast<std::size_t>(r) * n1 + i];
            const double* br = &b[static_cast<std::size_t>(r) * n2];
            for (int j = 0; j < n2; ++j) ci[j] += ari * br[j];
        }
    }
}

void add_row_vector(std::span<double> y, std::span<const double> b, int rows, int cols) {
    const long long work = static_cast<long long>(rows) * cols;
#pragma omp parallel for schedule(static) if (work > kParGrain)
    for (int r = 0; r < rows; ++r) {
        double* yr = &y[static_cast<std::size_t>(r) * cols];
        for (int j = 0; j < cols; ++j) yr[j] += b[j];
    }
}

void col_sums(std::span<const double> a, std::span<double> out, int rows, int cols) {
    // parallel over columns: each out[j] is a single-thread accumulation in row order
    const long long work = static_cast<long long>(rows) * cols;
#pragma omp parallel for schedule(static) if (work > kParGrain)
    for (int j = 0; j < cols; ++j) {
        double sum = 0.0;
        for (int r = 0; r < rows; ++r) sum += a[static_cast<std::size_t>(r) * cols + j];
        out[j] = sum;
    }
}

void adam_update(std::span<double> param, std::span<const double> grad,
                 std::span<double> m, std::span<double> v,
                 double lr, double beta1, double beta2, double eps, long long step) {
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    const long long n = static_cast<long long>(param.size());
#pragma omp parallel for schedule(static) if (n > kParGrain)
    for (long long i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace arvae::kernels
