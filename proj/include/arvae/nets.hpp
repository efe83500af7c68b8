#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "arvae/posterior.hpp"

namespace arvae {

enum class Activation { identity, relu, tanh, sigmoid };

void apply_activation(Activation act, std::span<double> x);

// Dense layer, weights stored out_dim x in_dim row-major.
struct DenseLayer {
    int in_dim = 0;
    int out_dim = 0;
    std::vector<double> w;
    std::vector<double> b;
    Activation act = Activation::identity;

    bool empty() const { return w.empty(); }
};

// Uniform fan-in init U(-1/sqrt(in), 1/sqrt(in)), zero biases; draw order is
// row-major over w so a seed pins the exact weights.
DenseLayer make_layer(int in_dim, int out_dim, Activation act, std::uint64_t seed);

struct LayerCache {
    int batch = 0;
    std::vector<double> input;   // batch x in
    std::vector<double> preact;  // batch x out
    std::vector<double> output;  // batch x out
};

// out = act(x W^T + b) for a batch of row vectors; fills cache when given.
std::vector<double> layer_forward(const DenseLayer& layer, std::span<const double> x,
                                  int batch, LayerCache* cache);

struct LayerGrads {
    std::vector<double> w;
    std::vector<double> b;
    void zero();
};

// upstream is dL/d output (batch x out); accumulates parameter gradients and
// returns dL/d input (batch x in) for chaining.
std::vector<double> layer_backward(const DenseLayer& layer, const LayerCache& cache,
                                   std::span<const double> upstream, LayerGrads& grads);

struct Mlp {
    std::vector<DenseLayer> layers;
    int input_dim() const { return layers.front().in_dim; }
    int output_dim() const { return layers.back().out_dim; }
};

struct MlpCache {
    std::vector<LayerCache> layers;
};

std::vector<double> mlp_forward(const Mlp& net, std::span<const double> x, int batch,
                                MlpCache* cache);
std::vector<double> mlp_backward(const Mlp& net, const MlpCache& cache,
                                 std::span<const double> upstream,
                                 std::vector<LayerGrads>& grads);

enum class PosteriorKind { diag, ar1 };

// Posterior heads on top of the encoder trunk. Diagonal mode owns a d'->d
// log-variance layer; AR(1) mode owns two d'->1 layers for log s and the raw
// correlation. Exactly one mode is populated.
struct EncoderHeads {
    PosteriorKind kind = PosteriorKind::diag;
    DenseLayer mu;
    DenseLayer logvar;
    DenseLayer log_s;
    DenseLayer rho_raw;
};

// tanh squashed away from +-1 so the posterior type invariant |rho| < 1 holds
// for any finite pre-activation
double squash_rho(double rho_raw);
// exp guarded against under/overflow so variances stay strictly positive and
// finite
double squash_var(double log_v);

struct VaeModel {
    Mlp encoder;  // input -> hidden trunk
    EncoderHeads heads;
    Mlp decoder;  // latent -> hidden -> input
    int input_dim = 0;
    int hidden_dim = 0;
    int latent_dim = 0;

    PosteriorKind kind() const { return heads.kind; }
};

// Canonical architecture: encoder input->hidden (relu) + heads; decoder
// latent->hidden (relu) -> input (output_act). Layers draw from seeds derived
// per layer, so layers with equal shapes initialize identically across the
// two posterior kinds.
VaeModel make_vae(int input_dim, int hidden_dim, int latent_dim, PosteriorKind kind,
                  Activation output_act, std::uint64_t seed);

using Posterior = std::variant<DiagPosterior, Ar1Posterior>;

Posterior encode(const VaeModel& model, std::span<const double> x);
std::vector<double> decode(const VaeModel& model, std::span<const double> z);

// Gradient buffers shaped like the model parameters.
struct VaeGrads {
    std::vector<LayerGrads> encoder;
    LayerGrads mu, logvar, log_s, rho_raw;
    std::vector<LayerGrads> decoder;
    void zero();
};
VaeGrads make_grads(const VaeModel& model);

struct NamedParam {
    std::string name;
    std::span<double> data;
};
// Parameter arrays in a fixed registration order (encoder, heads, decoder);
// the same order aligns gradients and optimizer state.
std::vector<NamedParam> param_views(VaeModel& model);
std::vector<NamedParam> grad_views(const VaeModel& model, VaeGrads& grads);

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamHyper hp;
    long long step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
};

AdamState make_adam(const VaeModel& model, AdamHyper hp);
void adam_step(VaeModel& model, VaeGrads& grads, AdamState& state);

// Versioned binary checkpoint: header, metadata JSON string, model dims, then
// named little-endian double arrays. Layout documented in the README and kept
// stable; identical model + metadata give identical bytes.
void save_checkpoint(const std::string& path, const VaeModel& model,
                     const std::string& meta_json);

struct Checkpoint {
    VaeModel model;
    std::string meta_json;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace arvae
