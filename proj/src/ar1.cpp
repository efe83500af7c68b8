#include "arvae/ar1.hpp"

#include <cmath>
#include <stdexcept>

namespace arvae {

Ar1Cov::Ar1Cov(int dim_, double rho_, double s_) : dim(dim_), rho(rho_), s(s_) {
    if (dim < 1) throw std::invalid_argument("Ar1Cov: dim must be >= 1");
    if (!(std::abs(rho) < 1.0)) throw std::invalid_argument("Ar1Cov: |rho| must be < 1");
    if (!(s > 0.0)) throw std::invalid_argument("Ar1Cov: s must be > 0");
}

DenseMatrix materialize(const Ar1Cov& cov) {
    DenseMatrix c(cov.dim, cov.dim);
    for (int i = 0; i < cov.dim; ++i) {
        double p = cov.s;  // s * rho^(j-i) as j walks right from the diagonal
        c(i, i) = p;
        for (int j = i + 1; j < cov.dim; ++j) {
            p *= cov.rho;
            c(i, j) = p;
            c(j, i) = p;
        }
    }
    return c;
}

double log_det(const Ar1Cov& cov) {
    return cov.dim * std::log(cov.s) + (cov.dim - 1) * std::log1p(-cov.rho * cov.rho);
}

DenseMatrix cholesky_factor(const Ar1Cov& cov) {
    const double sq_s = std::sqrt(cov.s);
    const double innov = sq_s * std::sqrt(1.0 - cov.rho * cov.rho);
    DenseMatrix l(cov.dim, cov.dim);
    // column 0 scaled by sqrt(s), later columns by the innovation scale
    double p = sq_s;
    l(0, 0) = p;
    for (int i = 1; i < cov.dim; ++i) {
        p *= cov.rho;
        l(i, 0) = p;
    }
    for (int j = 1; j < cov.dim; ++j) {
        double q = innov;
        l(j, j) = q;
        for (int i = j + 1; i < cov.dim; ++i) {
            q *= cov.rho;
            l(i, j) = q;
        }
    }
    return l;
}

void color(const Ar1Cov& cov, std::span<const double> eps, std::span<double> out) {
    if (static_cast<int>(eps.size()) != cov.dim || static_cast<int>(out.size()) != cov.dim)
        throw std::invalid_argument("color: eps length must equal cov.dim");
    const double sq_s = std::sqrt(cov.s);
    const double innov = sq_s * std::sqrt(1.0 - cov.rho * cov.rho);
    out[0] = sq_s * eps[0];
    for (int j = 1; j < cov.dim; ++j) out[j] = cov.rho * out[j - 1] + innov * eps[j];
}

std::vector<double> color(const Ar1Cov& cov, std::span<const double> eps) {
    std::vector<double> y(cov.dim);
    color(cov, eps, y);
    return y;
}

ColorGrad color_grad(const Ar1Cov& cov, std::span<const double> eps,
                     std::span<const double> upstream) {
    const int d = cov.dim;
    if (static_cast<int>(eps.size()) != d || static_cast<int>(upstream.size()) != d)
        throw std::invalid_argument("color_grad: vector lengths must equal cov.dim");

    const double sq_s = std::sqrt(cov.s);
    const double one_m_r2 = 1.0 - cov.rho * cov.rho;
    const double innov = sq_s * std::sqrt(one_m_r2);

    std::vector<double> y(d);
    color(cov, eps, y);

    // Adjoint scan: ybar[j] = u[j] + rho * ybar[j+1] collects every path from
    // y[j] into the loss through the recursion.
    double ybar = 0.0;
    double d_rho_direct = 0.0;  // through the rho * y[j-1] terms
    double d_innov = 0.0;       // coefficient of the innovation scale
    double d_sqs = 0.0;         // coefficient of sqrt(s) in y[0]
    for (int j = d - 1; j >= 1; --j) {
        ybar = upstream[j] + cov.rho * ybar;
        d_rho_direct += ybar * y[j - 1];
        d_innov += ybar * eps[j];
    }
    d_sqs = (upstream[0] + cov.rho * ybar) * eps[0];

    // d innov / d rho = -rho * sqrt(s) / sqrt(1-rho^2); both scales are
    // proportional to sqrt(s), so d/d log s = (scale/2) * coefficient.
    ColorGrad g;
    g.d_rho = d_rho_direct - d_innov * cov.rho * sq_s / std::sqrt(one_m_r2);
    g.d_log_s = 0.5 * (d_sqs * sq_s + d_innov * innov);
    return g;
}

}  // namespace arvae
