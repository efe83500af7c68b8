#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "arvae/data_io.hpp"
#include "arvae/nets.hpp"

namespace arvae {

enum class ReconLoss { bernoulli, gaussian };

struct TrainConfig {
    PosteriorKind posterior_kind = PosteriorKind::diag;
    ReconLoss recon_loss = ReconLoss::bernoulli;
    double beta = 1.0;
    int latent_dim = 8;
    int hidden_dim = 64;
    int epochs = 10;
    int batch_size = 64;
    double lr = 1e-3;
    std::uint64_t seed = 1;

    // throws std::invalid_argument naming the offending field
    void validate() const;
    // sigmoid under the bernoulli loss, identity under the gaussian one
    Activation output_activation() const;
    // resolved config echo with a stable key order; equal configs give equal
    // strings, so the echo doubles as a reproducibility fingerprint
    std::string to_json() const;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double test_loss = 0.0;
    double test_recon = 0.0;
    double test_kl = 0.0;
    double seconds = 0.0;
};

struct LossParts {
    double total = 0.0;
    double recon = 0.0;
};

// Per-sample negative log-likelihood plus weighted KL. Bernoulli mode sums
// -[x log xh + (1-x) log(1-xh)] with xh clamped to [1e-7, 1-1e-7]; gaussian
// mode is 0.5 |x - xh|^2. total = recon + beta * kl. x must lie in [0, 1].
LossParts elbo_loss(std::span<const double> x, std::span<const double> xhat, double kl,
                    const TrainConfig& cfg);

// Raised when a training step produces a non-finite loss; the message names
// the epoch, the batch, and the parameter norms at the point of failure.
struct TrainAbort : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BatchEval {
    double loss_sum = 0.0;
    double recon_sum = 0.0;
    double kl_sum = 0.0;
};

// One mini-batch pass at fixed noise. x is batch rows of model.input_dim,
// eps is batch rows of model.latent_dim. Sums run over the batch samples in
// index order. When grads is non-null the full backward pass accumulates
// parameter gradients of loss_sum into it. Deterministic given (model, x,
// eps); this is also the surface the finite-difference checks probe.
BatchEval batch_eval(const VaeModel& model, std::span<const double> x, int batch,
                     std::span<const double> eps, const TrainConfig& cfg, VaeGrads* grads);

struct TrainResult {
    VaeModel model;
    std::vector<EpochStats> stats;
    std::string csv;
};

// CSV log: header epoch,train_loss,test_loss,test_recon,test_kl,seconds and
// one row per epoch, losses at 12 significant digits.
std::string stats_csv(const std::vector<EpochStats>& stats);

// Seeded mini-batch training of the configured posterior variant. Every
// random stream (weight init, shuffles, reparametrization noise, evaluation
// noise) derives from cfg.seed, so identical inputs reproduce identical stats
// and identical final weights. The test split is scored after each epoch with
// an evaluation noise stream that is fixed across epochs. Shared-shape layers
// initialize identically for both posterior kinds under the same seed, which
// is what makes paired diag/ar1 runs a controlled comparison.
TrainResult train(const Dataset& train_split, const Dataset& test_split,
                  const TrainConfig& cfg);

// Decode count prior draws z ~ N(0, I); outputs clamped into [0, 1].
std::vector<std::vector<double>> generate(const VaeModel& model, int count, NormalRng& rng);

}  // namespace arvae
