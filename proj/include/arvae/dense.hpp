#pragma once

#include <span>
#include <stdexcept>
#include <vector>

namespace arvae {

// Row-major dense matrix. Only used on test/oracle paths; production code
// works with O(d) recursions and the batched kernels.
struct DenseMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> entries;

    DenseMatrix() = default;
    DenseMatrix(int r, int c) : rows(r), cols(c), entries(static_cast<std::size_t>(r) * c, 0.0) {
        if (r <= 0 || c <= 0) throw std::invalid_argument("DenseMatrix: dimensions must be positive");
    }

    double& operator()(int i, int j) { return entries[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return entries[static_cast<std::size_t>(i) * cols + j]; }

    static DenseMatrix identity(int n) {
        DenseMatrix m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

// y = M x, with compensated (Kahan) accumulation so oracle comparisons are
// not limited by the oracle's own rounding.
inline std::vector<double> matvec(const DenseMatrix& m, std::span<const double> x) {
    if (static_cast<int>(x.size()) != m.cols) throw std::invalid_argument("matvec: length mismatch");
    std::vector<double> y(m.rows, 0.0);
    for (int i = 0; i < m.rows; ++i) {
        double sum = 0.0, comp = 0.0;
        for (int j = 0; j < m.cols; ++j) {
            double term = m(i, j) * x[j] - comp;
            double t = sum + term;
            comp = (t - sum) - term;
            sum = t;
        }
        y[i] = sum;
    }
    return y;
}

// A * B^T
inline DenseMatrix matmul_abt(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols != b.cols) throw std::invalid_argument("matmul_abt: inner dimension mismatch");
    DenseMatrix c(a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < b.rows; ++j) {
            double sum = 0.0;
            for (int k = 0; k < a.cols; ++k) sum += a(i, k) * b(j, k);
            c(i, j) = sum;
        }
    return c;
}

}  // namespace arvae
