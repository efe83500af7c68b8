#include "arvae/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace arvae::oracle {

DenseMatrix dense_cholesky(const DenseMatrix& m) {
    if (m.rows != m.cols) throw std::invalid_argument("dense_cholesky: matrix must be square");
    const int n = m.rows;
    DenseMatrix l(n, n);
    for (int j = 0; j < n; ++j) {
        double diag = m(j, j);
        for (int p = 0; p < j; ++p) diag -= l(j, p) * l(j, p);
        if (!(diag > 0.0)) throw std::runtime_error("dense_cholesky: not positive definite");
        l(j, j) = std::sqrt(diag);
        for (int i = j + 1; i < n; ++i) {
            double v = m(i, j);
            for (int p = 0; p < j; ++p) v -= l(i, p) * l(j, p);
            l(i, j) = v / l(j, j);
        }
    }
    return l;
}

double log_det_from_cholesky(const DenseMatrix& l) {
    double sum = 0.0;
    for (int i = 0; i < l.rows; ++i) sum += std::log(l(i, i));
    return 2.0 * sum;
}

std::vector<double> cholesky_solve(const DenseMatrix& l, std::span<const double> rhs) {
    const int n = l.rows;
    if (static_cast<int>(rhs.size()) != n)
        throw std::invalid_argument("cholesky_solve: length mismatch");
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) {
        double v = rhs[i];
        for (int j = 0; j < i; ++j) v -= l(i, j) * y[j];
        y[i] = v / l(i, i);
    }
    std::vector<double> x(n);
    for (int i = n - 1; i >= 0; --i) {
        double v = y[i];
        for (int j = i + 1; j < n; ++j) v -= l(j, i) * x[j];
        x[i] = v / l(i, i);
    }
    return x;
}

double gaussian_kl_vs_std_normal(std::span<const double> mu, const DenseMatrix& cov) {
    const int d = cov.rows;
    if (static_cast<int>(mu.size()) != d)
        throw std::invalid_argument("gaussian_kl_vs_std_normal: length mismatch");
    double trace = 0.0;
    for (int i = 0; i < d; ++i) trace += cov(i, i);
    double mu2 = 0.0;
    for (double m : mu) mu2 += m * m;
    const double ld = log_det_from_cholesky(dense_cholesky(cov));
    return 0.5 * (trace + mu2 - d - ld);
}

double gaussian_log_density(std::span<const double> z, std::span<const double> mu,
                            const DenseMatrix& chol_l) {
    const int d = chol_l.rows;
    std::vector<double> r(d);
    for (int i = 0; i < d; ++i) r[i] = z[i] - mu[i];
    // solve L w = r; then (z-mu)^T C^-1 (z-mu) = w^T w
    std::vector<double> w(d);
    for (int i = 0; i < d; ++i) {
        double v = r[i];
        for (int j = 0; j < i; ++j) v -= chol_l(i, j) * w[j];
        w[i] = v / chol_l(i, i);
    }
    double quad = 0.0;
    for (double x : w) quad += x * x;
    constexpr double kLog2Pi = 1.8378770664093454836;
    return -0.5 * (quad + d * kLog2Pi + log_det_from_cholesky(chol_l));
}

McEstimate mc_kl(const std::function<std::vector<double>(NormalRng&)>& sampler,
                 const std::function<double(std::span<const double>)>& log_q,
                 const std::function<double(std::span<const double>)>& log_p,
                 long n_draws, std::uint64_t seed) {
    if (n_draws < 2) throw std::invalid_argument("mc_kl: need at least 2 draws");
    constexpr int kShards = 64;
    const long base = n_draws / kShards;
    const long rem = n_draws % kShards;
    double sums[kShards];
    double sq_sums[kShards];
#pragma omp parallel for schedule(static)
    for (int sh = 0; sh < kShards; ++sh) {
        NormalRng rng(mix_seed(seed, static_cast<std::uint64_t>(sh)));
        const long count = base + (sh < rem ? 1 : 0);
        double s = 0.0, sq = 0.0;
        for (long i = 0; i < count; ++i) {
            const std::vector<double> z = sampler(rng);
            const double v = log_q(z) - log_p(z);
            s += v;
            sq += v * v;
        }
        sums[sh] = s;
        sq_sums[sh] = sq;
    }
    double total = 0.0, total_sq = 0.0;
    for (int sh = 0; sh < kShards; ++sh) {
        total += sums[sh];
        total_sq += sq_sums[sh];
    }
    const double n = static_cast<double>(n_draws);
    McEstimate est;
    est.mean = total / n;
    const double var = std::max(0.0, (total_sq - n * est.mean * est.mean) / (n - 1.0));
    est.std_error = std::sqrt(var / n);
    return est;
}

GradCheckReport finite_diff(const std::function<double(std::span<const double>)>& loss_fn,
                            std::span<const double> params,
                            std::span<const double> analytic_grad,
                            double step, double tol) {
    if (params.size() != analytic_grad.size())
        throw std::invalid_argument("finite_diff: gradient length mismatch");
    constexpr double kAbsFloor = 1e-6;
    std::vector<double> p(params.begin(), params.end());
    GradCheckReport rep;
    rep.step = step;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double saved = p[i];
        p[i] = saved + step;
        const double up = loss_fn(p);
        p[i] = saved - step;
        const double down = loss_fn(p);
        p[i] = saved;
        const double fd = (up - down) / (2.0 * step);
        const double denom = std::max({std::abs(fd), std::abs(analytic_grad[i]), kAbsFloor});
        const double rel = std::abs(fd - analytic_grad[i]) / denom;
        if (rel > rep.max_rel_err) {
            rep.max_rel_err = rel;
            rep.worst_index = static_cast<int>(i);
        }
    }
    rep.pass = rep.max_rel_err < tol;
    return rep;
}

}  // namespace arvae::oracle
