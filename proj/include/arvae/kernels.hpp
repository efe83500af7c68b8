#pragma once

#include <span>

namespace arvae::kernels {

// Batched dense primitives behind the network forward/backward passes.
// All matrices are row-major. Each output element is produced by exactly one
// thread with a fixed accumulation order, so the OpenMP variants are
// bit-identical to the serial references below at any thread count.

// C[m x n] = A[m x k] * B[n x k]^T
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             int m, int n, int k);

// C[m x n] = A[m x k] * B[k x n]
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             int m, int n, int k);

// C[n1 x n2] = A[m x n1]^T * B[m x n2]
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             int m, int n1, int n2);

// y[r, :] += b for every row r of y[rows x cols]
void add_row_vector(std::span<double> y, std::span<const double> b, int rows, int cols);

// out[j] = sum_r a[r, j]
void col_sums(std::span<const double> a, std::span<double> out, int rows, int cols);

// Bias-corrected adaptive-moment update, elementwise over one parameter array.
void adam_update(std::span<double> param, std::span<const double> grad,
                 std::span<double> m, std::span<double> v,
                 double lr, double beta1, double beta2, double eps, long long step);

// Serial reference implementations, kept for tests and the kernel benchmark.
namespace serial {
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             int m, int n, int k);
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             int m, int n, int k);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             int m, int n1, int n2);
void add_row_vector(std::span<double> y, std::span<const double> b, int rows, int cols);
void col_sums(std::span<const double> a, std::span<double> out, int rows, int cols);
void adam_update(std::span<double> param, std::span<const double> grad,
                 std::span<double> m, std::span<double> v,
                 double lr, double beta1, double beta2, double eps, long long step);
}  // namespace serial

}  // namespace arvae::kernels
