#pragma once

#include <span>
#include <vector>

#include "arvae/dense.hpp"

namespace arvae {

// First-order autoregressive (Kac-Murdock-Szego) covariance:
//   C = s * Toeplitz([1, rho, rho^2, ..., rho^{d-1}]),  entry (i,j) = s * rho^|i-j|.
// Symmetric positive definite for every |rho| < 1, s > 0.
struct Ar1Cov {
    int dim;
    double rho;
    double s;

    Ar1Cov(int dim, double rho, double s);
};

// Dense d x d matrix with entries s * rho^|i-j|. Test/oracle target only.
DenseMatrix materialize(const Ar1Cov& cov);

// log det C = d log s + (d-1) log(1 - rho^2)
double log_det(const Ar1Cov& cov);

// Lower-triangular L with L L^T = C:
//   column 0:    sqrt(s) * [1, rho, rho^2, ...]^T
//   column j>=1: sqrt(s(1-rho^2)) * [1, rho, rho^2, ...]^T below the diagonal
DenseMatrix cholesky_factor(const Ar1Cov& cov);

// y = L * eps by the O(d) coloring recursion
//   y[0] = sqrt(s) eps[0],   y[j] = rho y[j-1] + sqrt(s(1-rho^2)) eps[j]
void color(const Ar1Cov& cov, std::span<const double> eps, std::span<double> out);
std::vector<double> color(const Ar1Cov& cov, std::span<const double> eps);

// Reverse-mode derivative of <upstream, color(cov, eps)> with respect to rho
// and log s (the raw quantities the optimizer updates are tanh/exp of these
// on the caller's side; d<u,y>/d mu is the identity and stays with the caller).
struct ColorGrad {
    double d_rho = 0.0;
    double d_log_s = 0.0;
};
ColorGrad color_grad(const Ar1Cov& cov, std::span<const double> eps,
                     std::span<const double> upstream);

}  // namespace arvae
