#include "arvae/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "json.hpp"

#include "arvae/posterior.hpp"

namespace arvae {

namespace {

// stream tags hung off cfg.seed; disjoint tags keep the streams independent
constexpr std::uint64_t kInitStream = 0x696e6974;     // weight init
constexpr std::uint64_t kShuffleStream = 0x73687566;  // per-epoch batch order
constexpr std::uint64_t kNoiseStream = 0x6e6f6973;    // training reparam noise
constexpr std::uint64_t kEvalStream = 0x6576616c;     // test-split reparam noise

constexpr double kBernoulliClamp = 1e-7;

double clamp_prob(double v) {
    if (v < kBernoulliClamp) return kBernoulliClamp;
    if (v > 1.0 - kBernoulliClamp) return 1.0 - kBernoulliClamp;
    return v;
}

bool all_finite(std::span<const double> xs) {
    for (double v : xs)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace

void TrainConfig::validate() const {
    if (!(beta > 0.0) || !std::isfinite(beta))
        throw std::invalid_argument("config: beta must be a positive real");
    if (latent_dim < 1) throw std::invalid_argument("config: d must be a positive integer");
    if (hidden_dim < 1)
        throw std::invalid_argument("config: hidden must be a positive integer");
    if (epochs < 0) throw std::invalid_argument("config: epochs must be non-negative");
    if (batch_size < 1)
        throw std::invalid_argument("config: batch must be a positive integer");
    if (!(lr > 0.0) || !std::isfinite(lr))
        throw std::invalid_argument("config: lr must be a positive real");
}

Activation TrainConfig::output_activation() const {
    return recon_loss == ReconLoss::bernoulli ? Activation::sigmoid : Activation::identity;
}

std::string TrainConfig::to_json() const {
    nlohmann::json j;
    j["posterior"] = posterior_kind == PosteriorKind::diag ? "diag" : "ar1";
    j["recon_loss"] = recon_loss == ReconLoss::bernoulli ? "bernoulli" : "gaussian";
    j["beta"] = beta;
    j["d"] = latent_dim;
    j["hidden"] = hidden_dim;
    j["epochs"] = epochs;
    j["batch"] = batch_size;
    j["lr"] = lr;
    j["seed"] = seed;
    return j.dump();
}

LossParts elbo_loss(std::span<const double> x, std::span<const double> xhat, double kl,
                    const TrainConfig& cfg) {
    if (x.size() != xhat.size())
        throw std::invalid_argument("elbo_loss: x and xhat length mismatch");
    double recon = 0.0;
    if (cfg.recon_loss == ReconLoss::bernoulli) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (!(x[i] >= 0.0 && x[i] <= 1.0))
                throw std::invalid_argument("elbo_loss: x entries must lie in [0, 1]");
            const double c = clamp_prob(xhat[i]);
            recon -= x[i] * std::log(c) + (1.0 - x[i]) * std::log(1.0 - c);
        }
    } else {
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (!(x[i] >= 0.0 && x[i] <= 1.0))
                throw std::invalid_argument("elbo_loss: x entries must lie in [0, 1]");
            const double r = x[i] - xhat[i];
            recon += 0.5 * r * r;
        }
    }
    return {recon + cfg.beta * kl, recon};
}

BatchEval batch_eval(const VaeModel& model, std::span<const double> x, int batch,
                     std::span<const double> eps, const TrainConfig& cfg, VaeGrads* grads) {
    const int n = model.input_dim;
    const int d = model.latent_dim;
    if (batch < 1) throw std::invalid_argument("batch_eval: batch must be positive");
    if (x.size() != static_cast<std::size_t>(batch) * n)
        throw std::invalid_argument("batch_eval: input size mismatch");
    if (eps.size() != static_cast<std::size_t>(batch) * d)
        throw std::invalid_argument("batch_eval: noise size mismatch");
    const bool diag = model.kind() == PosteriorKind::diag;

    MlpCache enc_cache;
    LayerCache mu_cache, lv_cache, ls_cache, rr_cache;
    const std::vector<double> h =
        mlp_forward(model.encoder, x, batch, grads ? &enc_cache : nullptr);
    const std::vector<double> mu =
        layer_forward(model.heads.mu, h, batch, grads ? &mu_cache : nullptr);
    std::vector<double> lv, ls, rr;
    if (diag) {
        lv = layer_forward(model.heads.logvar, h, batch, grads ? &lv_cache : nullptr);
    } else {
        ls = layer_forward(model.heads.log_s, h, batch, grads ? &ls_cache : nullptr);
        rr = layer_forward(model.heads.rho_raw, h, batch, grads ? &rr_cache : nullptr);
    }
    if (!all_finite(mu) || !all_finite(lv) || !all_finite(ls) || !all_finite(rr))
        throw TrainAbort("non-finite encoder head outputs");

    std::vector<DiagPosterior> diag_posts;
    std::vector<Ar1Posterior> ar1_posts;
    std::vector<double> z(static_cast<std::size_t>(batch) * d);
    std::vector<double> kl(batch);
    for (int i = 0; i < batch; ++i) {
        const std::size_t zoff = static_cast<std::size_t>(i) * d;
        std::vector<double> mu_i(mu.begin() + zoff, mu.begin() + zoff + d);
        std::span<const double> eps_i = eps.subspan(zoff, d);
        if (diag) {
            std::vector<double> s_i(d);
            for (int j = 0; j < d; ++j) s_i[j] = squash_var(lv[zoff + j]);
            diag_posts.emplace_back(std::move(mu_i), std::move(s_i));
            kl[i] = kl_diag(diag_posts.back());
            const auto zi = reparam_diag(diag_posts.back(), eps_i);
            std::copy(zi.begin(), zi.end(), z.begin() + zoff);
        } else {
            ar1_posts.emplace_back(std::move(mu_i), squash_rho(rr[i]), squash_var(ls[i]));
            kl[i] = kl_ar1(ar1_posts.back());
            const auto zi = reparam_ar1(ar1_posts.back(), eps_i);
            std::copy(zi.begin(), zi.end(), z.begin() + zoff);
        }
    }

    MlpCache dec_cache;
    const std::vector<double> xhat =
        mlp_forward(model.decoder, z, batch, grads ? &dec_cache : nullptr);

    BatchEval ev;
    for (int i = 0; i < batch; ++i) {
        const std::size_t xoff = static_cast<std::size_t>(i) * n;
        const LossParts lp =
            elbo_loss(x.subspan(xoff, n), std::span<const double>(xhat).subspan(xoff, n),
                      kl[i], cfg);
        ev.loss_sum += lp.total;
        ev.recon_sum += lp.recon;
        ev.kl_sum += kl[i];
    }
    if (!grads) return ev;

    // d loss / d xhat, routed through the decoder output activation by
    // layer_backward; pixels pinned by the bernoulli clamp get zero slope
    std::vector<double> up(x.size());
    if (cfg.recon_loss == ReconLoss::bernoulli) {
        for (std::size_t i = 0; i < up.size(); ++i) {
            if (xhat[i] <= kBernoulliClamp || xhat[i] >= 1.0 - kBernoulliClamp) {
                up[i] = 0.0;
            } else {
                up[i] = (xhat[i] - x[i]) / (xhat[i] * (1.0 - xhat[i]));
            }
        }
    } else {
        for (std::size_t i = 0; i < up.size(); ++i) up[i] = xhat[i] - x[i];
    }
    const std::vector<double> dz = mlp_backward(model.decoder, dec_cache, up, grads->decoder);

    std::vector<double> d_mu(static_cast<std::size_t>(batch) * d);
    std::vector<double> d_lv, d_ls, d_rr;
    if (diag) {
        d_lv.resize(d_mu.size());
    } else {
        d_ls.resize(batch);
        d_rr.resize(batch);
    }
    for (int i = 0; i < batch; ++i) {
        const std::size_t zoff = static_cast<std::size_t>(i) * d;
        LatentSample samp;
        samp.z.assign(z.begin() + zoff, z.begin() + zoff + d);
        samp.eps.assign(eps.begin() + zoff, eps.begin() + zoff + d);
        const std::span<const double> dz_i(dz.data() + zoff, static_cast<std::size_t>(d));
        if (diag) {
            const DiagPosterior& p = diag_posts[i];
            const DiagGrad sg = sample_diag_grad(p, samp, dz_i);
            const DiagGrad kg = kl_diag_grad(p);
            for (int j = 0; j < d; ++j) {
                d_mu[zoff + j] = sg.d_mu[j] + cfg.beta * kg.d_mu[j];
                d_lv[zoff + j] = sg.d_logvar[j] + cfg.beta * kg.d_logvar[j];
            }
        } else {
            const Ar1Posterior& p = ar1_posts[i];
            const Ar1Grad sg = sample_ar1_grad(p, samp, dz_i);
            const Ar1Grad kg = kl_ar1_grad(p);
            for (int j = 0; j < d; ++j)
                d_mu[zoff + j] = sg.d_mu[j] + cfg.beta * kg.d_mu[j];
            d_ls[i] = sg.d_log_s + cfg.beta * kg.d_log_s;
            d_rr[i] = sg.d_rho_raw + cfg.beta * kg.d_rho_raw;
        }
    }

    std::vector<double> dh = layer_backward(model.heads.mu, mu_cache, d_mu, grads->mu);
    if (diag) {
        const auto dh2 = layer_backward(model.heads.logvar, lv_cache, d_lv, grads->logvar);
        for (std::size_t i = 0; i < dh.size(); ++i) dh[i] += dh2[i];
    } else {
        const auto dh2 = layer_backward(model.heads.log_s, ls_cache, d_ls, grads->log_s);
        const auto dh3 = layer_backward(model.heads.rho_raw, rr_cache, d_rr, grads->rho_raw);
        for (std::size_t i = 0; i < dh.size(); ++i) dh[i] += dh2[i] + dh3[i];
    }
    mlp_backward(model.encoder, enc_cache, dh, grads->encoder);
    return ev;
}

std::string stats_csv(const std::vector<EpochStats>& stats) {
    std::string out = "epoch,train_loss,test_loss,test_recon,test_kl,seconds\n";
    char buf[192];
    for (const EpochStats& st : stats) {
        std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g,%.12g,%.12g,%.3f\n", st.epoch,
                      st.train_loss, st.test_loss, st.test_recon, st.test_kl, st.seconds);
        out += buf;
    }
    return out;
}

namespace {

std::string param_norms(VaeModel& model) {
    double total = 0.0;
    char buf[64];
    std::string out;
    for (const auto& p : param_views(model)) {
        double sq = 0.0;
        for (double v : p.data) sq += v * v;
        total += sq;
        if (!std::isfinite(sq)) {
            out += out.empty() ? "" : ", ";
            out += p.name + " non-finite";
        }
    }
    std::snprintf(buf, sizeof buf, "|params| = %.6g", std::sqrt(total));
    return out.empty() ? std::string(buf) : std::string(buf) + " (" + out + ")";
}

// scores the whole test split with the epoch-independent evaluation noise
BatchEval eval_split(const VaeModel& model, const Dataset& ds, const TrainConfig& cfg,
                     std::uint64_t eval_base) {
    const int d = model.latent_dim;
    const int n = ds.pixels();
    constexpr int kChunk = 256;
    BatchEval total;
    std::vector<double> eps;
    for (int i0 = 0; i0 < ds.count; i0 += kChunk) {
        const int b = std::min(kChunk, ds.count - i0);
        eps.resize(static_cast<std::size_t>(b) * d);
        for (int i = 0; i < b; ++i) {
            NormalRng rng(mix_seed(eval_base, static_cast<std::uint64_t>(i0 + i)));
            rng.fill_normal(std::span<double>(eps.data() + static_cast<std::size_t>(i) * d,
                                              static_cast<std::size_t>(d)));
        }
        const std::span<const double> xchunk(
            ds.images.data() + static_cast<std::size_t>(i0) * n,
            static_cast<std::size_t>(b) * n);
        const BatchEval ev = batch_eval(model, xchunk, b, eps, cfg, nullptr);
        total.loss_sum += ev.loss_sum;
        total.recon_sum += ev.recon_sum;
        total.kl_sum += ev.kl_sum;
    }
    return total;
}

}  // namespace

TrainResult train(const Dataset& train_split, const Dataset& test_split,
                  const TrainConfig& cfg) {
    cfg.validate();
    if (train_split.count < 1) throw std::invalid_argument("train: empty training split");
    if (test_split.count < 1) throw std::invalid_argument("train: empty test split");
    if (train_split.pixels() != test_split.pixels())
        throw std::invalid_argument("train: train/test image shapes differ");

    const int n = train_split.pixels();
    const int d = cfg.latent_dim;
    TrainResult result;
    result.model = make_vae(n, cfg.hidden_dim, d, cfg.posterior_kind,
                            cfg.output_activation(), mix_seed(cfg.seed, kInitStream));
    AdamState adam = make_adam(result.model, {cfg.lr, 0.9, 0.999, 1e-8});
    VaeGrads grads = make_grads(result.model);
    const std::uint64_t eval_base = mix_seed(cfg.seed, kEvalStream);

    std::vector<double> xbatch, eps;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto slices =
            batches(static_cast<std::size_t>(train_split.count),
                    static_cast<std::size_t>(cfg.batch_size),
                    mix_seed(mix_seed(cfg.seed, kShuffleStream), epoch));
        NormalRng noise(mix_seed(mix_seed(cfg.seed, kNoiseStream), epoch));
        double loss_sum = 0.0;
        for (std::size_t bi = 0; bi < slices.size(); ++bi) {
            const auto& slice = slices[bi];
            const int b = static_cast<int>(slice.size());
            xbatch.resize(static_cast<std::size_t>(b) * n);
            eps.resize(static_cast<std::size_t>(b) * d);
            for (int i = 0; i < b; ++i) {
                const auto img = train_split.image(static_cast<int>(slice[i]));
                std::copy(img.begin(), img.end(),
                          xbatch.begin() + static_cast<std::size_t>(i) * n);
            }
            noise.fill_normal(eps);
            grads.zero();
            BatchEval ev;
            try {
                ev = batch_eval(result.model, xbatch, b, eps, cfg, &grads);
            } catch (const TrainAbort& e) {
                throw TrainAbort("epoch " + std::to_string(epoch) + " batch " +
                                 std::to_string(bi) + ": " + e.what() + "; " +
                                 param_norms(result.model));
            }
            if (!std::isfinite(ev.loss_sum))
                throw TrainAbort("epoch " + std::to_string(epoch) + " batch " +
                                 std::to_string(bi) + ": non-finite loss; " +
                                 param_norms(result.model));
            const double inv_b = 1.0 / b;
            for (auto& g : grad_views(result.model, grads))
                for (double& v : g.data) v *= inv_b;
            adam_step(result.model, grads, adam);
            loss_sum += ev.loss_sum;
        }

        const BatchEval te = eval_split(result.model, test_split, cfg, eval_base);
        EpochStats st;
        st.epoch = epoch;
        st.train_loss = loss_sum / train_split.count;
        st.test_recon = te.recon_sum / test_split.count;
        st.test_kl = te.kl_sum / test_split.count;
        st.test_loss = (te.recon_sum + cfg.beta * te.kl_sum) / test_split.count;
        st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.stats.push_back(st);
    }
    result.csv = stats_csv(result.stats);
    return result;
}

std::vector<std::vector<double>> generate(const VaeModel& model, int count, NormalRng& rng) {
    if (count < 0) throw std::invalid_argument("generate: count must be non-negative");
    std::vector<std::vector<double>> images;
    if (count == 0) return images;
    std::vector<double> zs(static_cast<std::size_t>(count) * model.latent_dim);
    rng.fill_normal(zs);
    const std::vector<double> out = mlp_forward(model.decoder, zs, count, nullptr);
    const int n = model.input_dim;
    images.reserve(count);
    for (int i = 0; i < count; ++i) {
        std::vector<double> img(out.begin() + static_cast<std::size_t>(i) * n,
                                out.begin() + static_cast<std::size_t>(i + 1) * n);
        for (double& v : img) v = std::clamp(v, 0.0, 1.0);
        images.push_back(std::move(img));
    }
    return images;
}

}  // namespace arvae
