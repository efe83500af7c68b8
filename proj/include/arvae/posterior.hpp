#pragma once

#include <span>
#include <vector>

#include "arvae/ar1.hpp"
#include "arvae/rng.hpp"

namespace arvae {

// Diagonal Gaussian posterior N(mu, diag(s)), the baseline family.
struct DiagPosterior {
    std::vector<double> mu;
    std::vector<double> s;  // per-dimension variances, strictly positive

    DiagPosterior(std::vector<double> mu, std::vector<double> s);
    int dim() const { return static_cast<int>(mu.size()); }
};

// AR(1) Gaussian posterior N(mu, C_(rho,s)): full correlation structure from
// two scalars. The caller squashes raw network outputs (tanh for rho, exp for
// s) before constructing one; the *_grad operations hand back derivatives with
// respect to those raw pre-activations, which is what the optimizer updates.
struct Ar1Posterior {
    std::vector<double> mu;
    double rho;
    double s;

    Ar1Posterior(std::vector<double> mu, double rho, double s);
    int dim() const { return static_cast<int>(mu.size()); }
    Ar1Cov cov() const { return Ar1Cov(dim(), rho, s); }
};

// A reparametrized draw together with the noise that produced it.
struct LatentSample {
    std::vector<double> z;
    std::vector<double> eps;
};

// KL[N(mu, diag(s)) || N(0, I)] = 1/2 [sum s + |mu|^2 - d - sum log s]
double kl_diag(const DiagPosterior& p);

// KL[N(mu, C_(rho,s)) || N(0, I)]
//   = 1/2 [|mu|^2 + d(s - 1 - log s) - (d-1) log(1 - rho^2)]
double kl_ar1(const Ar1Posterior& p);

struct DiagGrad {
    std::vector<double> d_mu;
    std::vector<double> d_logvar;
};

struct Ar1Grad {
    std::vector<double> d_mu;
    double d_log_s = 0.0;
    double d_rho_raw = 0.0;
};

// d KL / d mu = mu;  d KL / d logvar_j = (s_j - 1) / 2
DiagGrad kl_diag_grad(const DiagPosterior& p);

// d KL / d mu = mu;  d KL / d log s = (d/2)(s - 1);
// d KL / d rho_raw = (d-1) rho  -- the 1/(1-rho^2) of the KL cancels the
// tanh Jacobian (1-rho^2) exactly.
Ar1Grad kl_ar1_grad(const Ar1Posterior& p);

// Deterministic reparametrizations given explicit noise.
std::vector<double> reparam_diag(const DiagPosterior& p, std::span<const double> eps);
std::vector<double> reparam_ar1(const Ar1Posterior& p, std::span<const double> eps);

// z = mu + sqrt(s) . eps, eps ~ N(0, I) drawn from rng
LatentSample sample_diag(const DiagPosterior& p, NormalRng& rng);

// z = mu + L_(rho,s) eps via the O(d) coloring recursion
LatentSample sample_ar1(const Ar1Posterior& p, NormalRng& rng);

// Pathwise gradients of <upstream, z> at fixed eps. d_mu equals upstream and
// is returned for completeness; d_logvar follows the sqrt(exp(.)) chain.
DiagGrad sample_diag_grad(const DiagPosterior& p, const LatentSample& sample,
                          std::span<const double> upstream);
Ar1Grad sample_ar1_grad(const Ar1Posterior& p, const LatentSample& sample,
                        std::span<const double> upstream);

}  // namespace arvae
