#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "arvae/dense.hpp"
#include "arvae/rng.hpp"

// Independent verification machinery for the test suite and the self-check
// command. Nothing here may touch the structured O(d) production paths; these
// routines see only dense matrices and callbacks.
namespace arvae::oracle {

// Textbook lower Cholesky. Throws "not positive definite" on a bad pivot.
DenseMatrix dense_cholesky(const DenseMatrix& m);

// 2 * sum(log diag L) for a factor produced by dense_cholesky
double log_det_from_cholesky(const DenseMatrix& l);

// Solve L L^T x = rhs by forward/back substitution.
std::vector<double> cholesky_solve(const DenseMatrix& l, std::span<const double> rhs);

// KL[N(mu, C) || N(0, I)] = 1/2 (tr C + mu^T mu - d - log det C), with the
// log-determinant taken from a dense factorization.
double gaussian_kl_vs_std_normal(std::span<const double> mu, const DenseMatrix& cov);

// log N(z | mu, C) given the dense Cholesky factor of C
double gaussian_log_density(std::span<const double> z, std::span<const double> mu,
                            const DenseMatrix& chol_l);

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};

// Mean and standard error of log q(z) - log p(z) over reparametrized draws.
// Draws are split over a fixed number of shards with derived seeds and reduced
// in shard order, so the estimate does not depend on thread count.
McEstimate mc_kl(const std::function<std::vector<double>(NormalRng&)>& sampler,
                 const std::function<double(std::span<const double>)>& log_q,
                 const std::function<double(std::span<const double>)>& log_p,
                 long n_draws, std::uint64_t seed);

struct GradCheckReport {
    double max_rel_err = 0.0;
    int worst_index = -1;
    double step = 0.0;
    bool pass = false;
};

// Central finite differences of loss_fn against the supplied analytic
// gradient. Relative error uses an absolute floor of 1e-6 so near-zero
// components do not blow up the ratio. loss_fn must be deterministic in
// params (freeze any noise before calling).
GradCheckReport finite_diff(const std::function<double(std::span<const double>)>& loss_fn,
                            std::span<const double> params,
                            std::span<const double> analytic_grad,
                            double step, double tol);

}  // namespace arvae::oracle
