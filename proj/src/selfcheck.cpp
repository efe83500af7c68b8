#include "arvae/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "arvae/ar1.hpp"
#include "arvae/oracle.hpp"
#include "arvae/trainer.hpp"

namespace arvae {

namespace {

constexpr int kDims[] = {1, 2, 3, 8, 32, 64};
constexpr double kRhos[] = {-0.99, -0.5, 0.0, 0.5, 0.99};
constexpr double kScales[] = {0.01, 1.0, 100.0};

constexpr double kLog2Pi = 1.8378770664093454836;

double rel_err(double got, double want, double floor_) {
    return std::abs(got - want) / std::max(std::abs(want), floor_);
}

template <typename F>
void for_grid(F&& f) {
    for (int d : kDims)
        for (double rho : kRhos)
            for (double s : kScales) f(Ar1Cov(d, rho, s));
}

double check_cholesky_identity() {
    double worst = 0.0;
    for_grid([&](const Ar1Cov& cov) {
        const DenseMatrix c = materialize(cov);
        const DenseMatrix l = cholesky_factor(cov);
        const DenseMatrix llt = matmul_abt(l, l);
        for (int i = 0; i < cov.dim; ++i)
            for (int j = 0; j < cov.dim; ++j) {
                const double diff = std::abs(llt(i, j) - c(i, j));
                const double denom = std::max(std::abs(c(i, j)), 1e-300);
                worst = std::max(worst, diff == 0.0 ? 0.0 : diff / denom);
            }
    });
    return worst;
}

double check_cholesky_vs_dense() {
    double worst = 0.0;
    for_grid([&](const Ar1Cov& cov) {
        const DenseMatrix closed = cholesky_factor(cov);
        const DenseMatrix dense = oracle::dense_cholesky(materialize(cov));
        for (std::size_t i = 0; i < closed.entries.size(); ++i) {
            const double a = closed.entries[i];
            const double b = dense.entries[i];
            const double diff = std::abs(a - b);
            const double denom = std::max({std::abs(a), std::abs(b), 1e-300});
            worst = std::max(worst, diff == 0.0 ? 0.0 : diff / denom);
        }
    });
    return worst;
}

double check_log_det() {
    double worst = 0.0;
    for_grid([&](const Ar1Cov& cov) {
        const double got = log_det(cov);
        const double want =
            oracle::log_det_from_cholesky(oracle::dense_cholesky(materialize(cov)));
        worst = std::max(worst, rel_err(got, want, 1e-15));
    });
    return worst;
}

double hooked_kl(const CheckHooks& hooks, const Ar1Posterior& p) {
    return hooks.kl_ar1_fn ? hooks.kl_ar1_fn(p) : kl_ar1(p);
}

double check_kl_vs_oracle(const CheckHooks& hooks) {
    double worst = 0.0;
    NormalRng rng(0x6b6c6f72UL);
    for_grid([&](const Ar1Cov& cov) {
        std::vector<double> mu(cov.dim);
        rng.fill_normal(mu);
        const Ar1Posterior p(mu, cov.rho, cov.s);
        const double got = hooked_kl(hooks, p);
        const double want = oracle::gaussian_kl_vs_std_normal(mu, materialize(cov));
        worst = std::max(worst, rel_err(got, want, 1e-12));
    });
    return worst;
}

double check_kl_mc(const CheckHooks& hooks) {
    struct Setting {
        int d;
        double rho, s;
        std::uint64_t seed;
    };
    const Setting settings[] = {
        {8, 0.7, 2.0, 11}, {4, -0.6, 0.5, 12}, {16, 0.9, 1.2, 13}};
    double worst = 0.0;
    for (const Setting& cfg : settings) {
        NormalRng mu_rng(mix_seed(0x6d636d75UL, cfg.seed));
        std::vector<double> mu(cfg.d);
        mu_rng.fill_normal(mu);
        for (double& m : mu) m *= 0.5;
        const Ar1Posterior p(mu, cfg.rho, cfg.s);
        const DenseMatrix l = oracle::dense_cholesky(materialize(p.cov()));
        const auto sampler = [&](NormalRng& rng) { return sample_ar1(p, rng).z; };
        const auto log_q = [&](std::span<const double> z) {
            return oracle::gaussian_log_density(z, p.mu, l);
        };
        const auto log_p = [&](std::span<const double> z) {
            double sq = 0.0;
            for (double v : z) sq += v * v;
            return -0.5 * (sq + cfg.d * kLog2Pi);
        };
        const oracle::McEstimate est = oracle::mc_kl(sampler, log_q, log_p, 200000, cfg.seed);
        const double kl = hooked_kl(hooks, p);
        worst = std::max(worst, std::abs(kl - est.mean) / est.std_error);
    }
    return worst;
}

double check_kl_reduction(const CheckHooks& hooks) {
    double worst = 0.0;
    NormalRng rng(0x72656475UL);
    for (int c = 0; c < 1000; ++c) {
        const int d = static_cast<int>(rng.next_u64() % 64) + 1;
        const double s = std::exp(2.0 * (2.0 * rng.uniform() - 1.0));
        std::vector<double> mu(d);
        rng.fill_normal(mu);
        const double got = hooked_kl(hooks, Ar1Posterior(mu, 0.0, s));
        const double want = kl_diag(DiagPosterior(mu, std::vector<double>(d, s)));
        worst = std::max(worst, std::abs(got - want));
    }
    return worst;
}

double check_sampler_recursion() {
    double worst = 0.0;
    NormalRng rng(0x73616d70UL);
    for_grid([&](const Ar1Cov& cov) {
        const DenseMatrix l = cholesky_factor(cov);
        std::vector<double> eps(cov.dim);
        for (int rep = 0; rep < 3; ++rep) {
            rng.fill_normal(eps);
            const std::vector<double> fast = color(cov, eps);
            const std::vector<double> ref = matvec(l, eps);
            for (int i = 0; i < cov.dim; ++i)
                worst = std::max(worst, std::abs(fast[i] - ref[i]));
        }
    });
    return worst;
}

// packs [mu, log_s, rho_raw] so one finite-difference pass covers all three
double check_kl_grad() {
    double worst = 0.0;
    const struct {
        int d;
        double log_s, rho_raw;
        std::uint64_t seed;
    } settings[] = {{1, 0.0, 0.3, 21}, {5, -0.7, -0.9, 22}, {16, 0.4, 1.2, 23}};
    for (const auto& cfg : settings) {
        NormalRng rng(mix_seed(0x6b6c6764UL, cfg.seed));
        std::vector<double> params(cfg.d + 2);
        rng.fill_normal(std::span<double>(params.data(), cfg.d));
        params[cfg.d] = cfg.log_s;
        params[cfg.d + 1] = cfg.rho_raw;
        const auto loss = [&](std::span<const double> q) {
            std::vector<double> mu(q.begin(), q.begin() + cfg.d);
            return kl_ar1(Ar1Posterior(mu, std::tanh(q[cfg.d + 1]), std::exp(q[cfg.d])));
        };
        const Ar1Posterior p(
            std::vector<double>(params.begin(), params.begin() + cfg.d),
            std::tanh(params[cfg.d + 1]), std::exp(params[cfg.d]));
        const Ar1Grad g = kl_ar1_grad(p);
        std::vector<double> analytic(g.d_mu);
        analytic.push_back(g.d_log_s);
        analytic.push_back(g.d_rho_raw);
        const auto rep = oracle::finite_diff(loss, params, analytic, 1e-5, 1e-4);
        worst = std::max(worst, rep.max_rel_err);
    }
    return worst;
}

double check_sample_grad() {
    double worst = 0.0;
    const struct {
        int d;
        double log_s, rho_raw;
        std::uint64_t seed;
    } settings[] = {{1, 0.0, 0.0, 31}, {4, 0.5, 0.6, 32}, {12, -1.0, -1.1, 33}};
    for (const auto& cfg : settings) {
        NormalRng rng(mix_seed(0x73676764UL, cfg.seed));
        std::vector<double> eps(cfg.d), up(cfg.d);
        rng.fill_normal(eps);
        rng.fill_normal(up);
        std::vector<double> params(cfg.d + 2);
        rng.fill_normal(std::span<double>(params.data(), cfg.d));
        params[cfg.d] = cfg.log_s;
        params[cfg.d + 1] = cfg.rho_raw;
        const auto loss = [&](std::span<const double> q) {
            std::vector<double> mu(q.begin(), q.begin() + cfg.d);
            const Ar1Posterior p(mu, std::tanh(q[cfg.d + 1]), std::exp(q[cfg.d]));
            const std::vector<double> z = reparam_ar1(p, eps);
            double dot = 0.0;
            for (int j = 0; j < cfg.d; ++j) dot += up[j] * z[j];
            return dot;
        };
        const Ar1Posterior p(
            std::vector<double>(params.begin(), params.begin() + cfg.d),
            std::tanh(params[cfg.d + 1]), std::exp(params[cfg.d]));
        LatentSample samp;
        samp.eps = eps;
        samp.z = reparam_ar1(p, eps);
        const Ar1Grad g = sample_ar1_grad(p, samp, up);
        std::vector<double> analytic(g.d_mu);
        analytic.push_back(g.d_log_s);
        analytic.push_back(g.d_rho_raw);
        const auto rep = oracle::finite_diff(loss, params, analytic, 1e-5, 1e-4);
        worst = std::max(worst, rep.max_rel_err);
    }
    return worst;
}

double check_vae_grad() {
    double worst = 0.0;
    const struct {
        PosteriorKind kind;
        ReconLoss loss;
        std::uint64_t seed;
    } settings[] = {{PosteriorKind::diag, ReconLoss::bernoulli, 41},
                    {PosteriorKind::ar1, ReconLoss::bernoulli, 42},
                    {PosteriorKind::ar1, ReconLoss::gaussian, 43}};
    constexpr int n = 6, hidden = 5, d = 3, batch = 2;
    for (const auto& s : settings) {
        TrainConfig cfg;
        cfg.posterior_kind = s.kind;
        cfg.recon_loss = s.loss;
        cfg.beta = 0.7;
        cfg.latent_dim = d;
        cfg.hidden_dim = hidden;
        VaeModel model = make_vae(n, hidden, d, s.kind, cfg.output_activation(),
                                  mix_seed(0x76616567UL, s.seed));
        NormalRng rng(mix_seed(0x76616564UL, s.seed));
        std::vector<double> x(batch * n), eps(batch * d);
        for (double& v : x) v = rng.uniform();
        rng.fill_normal(eps);

        auto views = param_views(model);
        std::vector<double> params;
        for (const auto& p : views) params.insert(params.end(), p.data.begin(), p.data.end());

        VaeGrads grads = make_grads(model);
        batch_eval(model, x, batch, eps, cfg, &grads);
        std::vector<double> analytic;
        for (const auto& g : grad_views(model, grads))
            analytic.insert(analytic.end(), g.data.begin(), g.data.end());

        VaeModel scratch = model;
        auto scratch_views = param_views(scratch);
        const auto loss = [&](std::span<const double> q) {
            std::size_t off = 0;
            for (auto& p : scratch_views) {
                std::copy(q.begin() + off, q.begin() + off + p.data.size(), p.data.begin());
                off += p.data.size();
            }
            return batch_eval(scratch, x, batch, eps, cfg, nullptr).loss_sum;
        };
        const auto rep = oracle::finite_diff(loss, params, analytic, 1e-5, 1e-4);
        worst = std::max(worst, rep.max_rel_err);
    }
    return worst;
}

CheckResult make_result(std::string name, double err, double tol) {
    CheckResult r;
    r.name = std::move(name);
    r.max_error = err;
    r.tolerance = tol;
    r.passed = std::isfinite(err) && err <= tol;
    return r;
}

}  // namespace

std::vector<CheckResult> run_self_checks(const CheckHooks& hooks) {
    std::vector<CheckResult> out;
    out.push_back(make_result("cholesky_identity", check_cholesky_identity(), 1e-10));
    out.push_back(make_result("cholesky_vs_dense", check_cholesky_vs_dense(), 1e-9));
    out.push_back(make_result("log_det", check_log_det(), 1e-8));
    out.push_back(make_result("kl_ar1", check_kl_vs_oracle(hooks), 1e-9));
    out.push_back(make_result("kl_ar1_mc", check_kl_mc(hooks), 4.0));
    out.push_back(make_result("kl_reduction", check_kl_reduction(hooks), 1e-12));
    out.push_back(make_result("sampler_recursion", check_sampler_recursion(), 1e-12));
    out.push_back(make_result("kl_ar1_grad", check_kl_grad(), 1e-4));
    out.push_back(make_result("sample_ar1_grad", check_sample_grad(), 1e-4));
    out.push_back(make_result("vae_loss_grad", check_vae_grad(), 1e-4));
    return out;
}

std::string format_check_table(const std::vector<CheckResult>& results) {
    std::string out = "check                 max_error   tolerance  status\n";
    char buf[128];
    for (const CheckResult& r : results) {
        std::snprintf(buf, sizeof buf, "%-20s %10.3e  %10.1e  %s\n", r.name.c_str(),
                      r.max_error, r.tolerance, r.passed ? "ok" : "FAIL");
        out += buf;
    }
    return out;
}

bool all_passed(const std::vector<CheckResult>& results) {
    return std::all_of(results.begin(), results.end(),
                       [](const CheckResult& r) { return r.passed; });
}

}  // namespace arvae
