#include "arvae/posterior.hpp"

#include <cmath>
#include <stdexcept>

namespace arvae {

DiagPosterior::DiagPosterior(std::vector<double> mu_, std::vector<double> s_)
    : mu(std::move(mu_)), s(std::move(s_)) {
    if (mu.empty() || mu.size() != s.size())
        throw std::invalid_argument("DiagPosterior: mu and s must have equal positive length");
    for (double v : s)
        if (!(v > 0.0)) throw std::invalid_argument("DiagPosterior: variances must be > 0");
}

Ar1Posterior::Ar1Posterior(std::vector<double> mu_, double rho_, double s_)
    : mu(std::move(mu_)), rho(rho_), s(s_) {
    if (mu.empty()) throw std::invalid_argument("Ar1Posterior: mu must be non-empty");
    if (!(std::abs(rho) < 1.0)) throw std::invalid_argument("Ar1Posterior: |rho| must be < 1");
    if (!(s > 0.0)) throw std::invalid_argument("Ar1Posterior: s must be > 0");
}

double kl_diag(const DiagPosterior& p) {
    double acc = 0.0;
    for (int j = 0; j < p.dim(); ++j)
        acc += p.s[j] + p.mu[j] * p.mu[j] - 1.0 - std::log(p.s[j]);
    return 0.5 * acc;
}

double kl_ar1(const Ar1Posterior& p) {
    const int d = p.dim();
    double mu2 = 0.0;
    for (double m : p.mu) mu2 += m * m;
    return 0.5 * (mu2 + d * (p.s - 1.0 - std::log(p.s)) -
                  (d - 1) * std::log1p(-p.rho * p.rho));
}

DiagGrad kl_diag_grad(const DiagPosterior& p) {
    DiagGrad g;
    g.d_mu = p.mu;
    g.d_logvar.resize(p.dim());
    for (int j = 0; j < p.dim(); ++j) g.d_logvar[j] = 0.5 * (p.s[j] - 1.0);
    return g;
}

Ar1Grad kl_ar1_grad(const Ar1Posterior& p) {
    const int d = p.dim();
    Ar1Grad g;
    g.d_mu = p.mu;
    g.d_log_s = 0.5 * d * (p.s - 1.0);
    g.d_rho_raw = (d - 1) * p.rho;
    return g;
}

std::vector<double> reparam_diag(const DiagPosterior& p, std::span<const double> eps) {
    if (static_cast<int>(eps.size()) != p.dim())
        throw std::invalid_argument("reparam_diag: eps length mismatch");
    std::vector<double> z(p.dim());
    for (int j = 0; j < p.dim(); ++j) z[j] = p.mu[j] + std::sqrt(p.s[j]) * eps[j];
    return z;
}

std::vector<double> reparam_ar1(const Ar1Posterior& p, std::span<const double> eps) {
    std::vector<double> z = color(p.cov(), eps);
    for (int j = 0; j < p.dim(); ++j) z[j] += p.mu[j];
    return z;
}

LatentSample sample_diag(const DiagPosterior& p, NormalRng& rng) {
    LatentSample out;
    out.eps.resize(p.dim());
    rng.fill_normal(out.eps);
    out.z = reparam_diag(p, out.eps);
    return out;
}

LatentSample sample_ar1(const Ar1Posterior& p, NormalRng& rng) {
    LatentSample out;
    out.eps.resize(p.dim());
    rng.fill_normal(out.eps);
    out.z = reparam_ar1(p, out.eps);
    return out;
}

DiagGrad sample_diag_grad(const DiagPosterior& p, const LatentSample& sample,
                          std::span<const double> upstream) {
    if (upstream.size() != sample.eps.size() || static_cast<int>(upstream.size()) != p.dim())
        throw std::invalid_argument("sample_diag_grad: length mismatch");
    DiagGrad g;
    g.d_mu.assign(upstream.begin(), upstream.end());
    g.d_logvar.resize(p.dim());
    // z_j = mu_j + exp(logvar_j / 2) eps_j
    for (int j = 0; j < p.dim(); ++j)
        g.d_logvar[j] = upstream[j] * 0.5 * std::sqrt(p.s[j]) * sample.eps[j];
    return g;
}

Ar1Grad sample_ar1_grad(const Ar1Posterior& p, const LatentSample& sample,
                        std::span<const double> upstream) {
    if (upstream.size() != sample.eps.size() || static_cast<int>(upstream.size()) != p.dim())
        throw std::invalid_argument("sample_ar1_grad: length mismatch");
    const ColorGrad cg = color_grad(p.cov(), sample.eps, upstream);
    Ar1Grad g;
    g.d_mu.assign(upstream.begin(), upstream.end());
    g.d_log_s = cg.d_log_s;
    g.d_rho_raw = cg.d_rho * (1.0 - p.rho * p.rho);  // tanh Jacobian
    return g;
}

}  // namespace arvae
