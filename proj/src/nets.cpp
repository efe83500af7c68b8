#include "arvae/nets.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "arvae/kernels.hpp"

namespace arvae {

namespace {

// per-layer init stream tags
constexpr std::uint64_t kTrunkStream = 1;
constexpr std::uint64_t kMuStream = 2;
constexpr std::uint64_t kLogvarStream = 3;
constexpr std::uint64_t kLogSStream = 4;
constexpr std::uint64_t kRhoStream = 5;
constexpr std::uint64_t kDecHiddenStream = 6;
constexpr std::uint64_t kDecOutStream = 7;

double act_grad(Activation act, double output) {
    switch (act) {
        case Activation::identity: return 1.0;
        case Activation::relu: return output > 0.0 ? 1.0 : 0.0;
        case Activation::tanh: return 1.0 - output * output;
        case Activation::sigmoid: return output * (1.0 - output);
    }
    return 1.0;
}

}  // namespace

void apply_activation(Activation act, std::span<double> x) {
    switch (act) {
        case Activation::identity:
            break;
        case Activation::relu:
            for (double& v : x) v = v > 0.0 ? v : 0.0;
            break;
        case Activation::tanh:
            for (double& v : x) v = std::tanh(v);
            break;
        case Activation::sigmoid:
            for (double& v : x) v = 1.0 / (1.0 + std::exp(-v));
            break;
    }
}

DenseLayer make_layer(int in_dim, int out_dim, Activation act, std::uint64_t seed) {
    if (in_dim < 1 || out_dim < 1)
        throw std::invalid_argument("make_layer: dimensions must be positive");
    DenseLayer layer;
    layer.in_dim = in_dim;
    layer.out_dim = out_dim;
    layer.act = act;
    layer.w.resize(static_cast<std::size_t>(out_dim) * in_dim);
    layer.b.assign(out_dim, 0.0);
    NormalRng rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (double& w : layer.w) w = bound * (2.0 * rng.uniform() - 1.0);
    return layer;
}

std::vector<double> layer_forward(const DenseLayer& layer, std::span<const double> x,
                                  int batch, LayerCache* cache) {
    if (x.size() != static_cast<std::size_t>(batch) * layer.in_dim)
        throw std::invalid_argument("layer_forward: input size mismatch");
    std::vector<double> out(static_cast<std::size_t>(batch) * layer.out_dim);
    kernels::gemm_nt(x, layer.w, out, batch, layer.out_dim, layer.in_dim);
    kernels::add_row_vector(out, layer.b, batch, layer.out_dim);
    if (cache) {
        cache->batch = batch;
        cache->input.assign(x.begin(), x.end());
        cache->preact = out;
    }
    apply_activation(layer.act, out);
    if (cache) cache->output = out;
    return out;
}

void LayerGrads::zero() {
    std::fill(w.begin(), w.end(), 0.0);
    std::fill(b.begin(), b.end(), 0.0);
}

std::vector<double> layer_backward(const DenseLayer& layer, const LayerCache& cache,
                                   std::span<const double> upstream, LayerGrads& grads) {
    const int batch = cache.batch;
    if (upstream.size() != static_cast<std::size_t>(batch) * layer.out_dim)
        throw std::invalid_argument("layer_backward: upstream size mismatch");
    if (grads.w.size() != layer.w.size()) grads.w.assign(layer.w.size(), 0.0);
    if (grads.b.size() != layer.b.size()) grads.b.assign(layer.b.size(), 0.0);

    // d pre-activation
    std::vector<double> dpre(upstream.size());
    for (std::size_t i = 0; i < upstream.size(); ++i)
        dpre[i] = upstream[i] * act_grad(layer.act, cache.output[i]);

    // grad W += dpre^T X ; grad b += column sums of dpre
    std::vector<double> gw(layer.w.size());
    kernels::gemm_tn(dpre, cache.input, gw, batch, layer.out_dim, layer.in_dim);
    for (std::size_t i = 0; i < gw.size(); ++i) grads.w[i] += gw[i];
    std::vector<double> gb(layer.b.size());
    kernels::col_sums(dpre, gb, batch, layer.out_dim);
    for (std::size_t i = 0; i < gb.size(); ++i) grads.b[i] += gb[i];

    // d input = dpre W
    std::vector<double> dx(static_cast<std::size_t>(batch) * layer.in_dim);
    kernels::gemm_nn(dpre, layer.w, dx, batch, layer.in_dim, layer.out_dim);
    return dx;
}

std::vector<double> mlp_forward(const Mlp& net, std::span<const double> x, int batch,
                                MlpCache* cache) {
    if (cache) cache->layers.resize(net.layers.size());
    std::vector<double> cur(x.begin(), x.end());
    for (std::size_t i = 0; i < net.layers.size(); ++i)
        cur = layer_forward(net.layers[i], cur, batch, cache ? &cache->layers[i] : nullptr);
    return cur;
}

std::vector<double> mlp_backward(const Mlp& net, const MlpCache& cache,
                                 std::span<const double> upstream,
                                 std::vector<LayerGrads>& grads) {
    if (cache.layers.size() != net.layers.size())
        throw std::invalid_argument("mlp_backward: stale or missing forward cache");
    grads.resize(net.layers.size());
    std::vector<double> cur(upstream.begin(), upstream.end());
    for (std::size_t i = net.layers.size(); i-- > 0;)
        cur = layer_backward(net.layers[i], cache.layers[i], cur, grads[i]);
    return cur;
}

double squash_rho(double rho_raw) {
    constexpr double kMaxAbsRho = 1.0 - 1e-12;
    const double r = std::tanh(rho_raw);
    if (r > kMaxAbsRho) return kMaxAbsRho;
    if (r < -kMaxAbsRho) return -kMaxAbsRho;
    return r;
}

double squash_var(double log_v) {
    constexpr double kMaxLog = 700.0;  // exp stays finite and strictly positive
    const double clamped = log_v > kMaxLog ? kMaxLog : (log_v < -kMaxLog ? -kMaxLog : log_v);
    return std::exp(clamped);
}

VaeModel make_vae(int input_dim, int hidden_dim, int latent_dim, PosteriorKind kind,
                  Activation output_act, std::uint64_t seed) {
    VaeModel m;
    m.input_dim = input_dim;
    m.hidden_dim = hidden_dim;
    m.latent_dim = latent_dim;
    m.encoder.layers.push_back(
        make_layer(input_dim, hidden_dim, Activation::relu, mix_seed(seed, kTrunkStream)));
    m.heads.kind = kind;
    m.heads.mu = make_layer(hidden_dim, latent_dim, Activation::identity,
                            mix_seed(seed, kMuStream));
    if (kind == PosteriorKind::diag) {
        m.heads.logvar = make_layer(hidden_dim, latent_dim, Activation::identity,
                                    mix_seed(seed, kLogvarStream));
    } else {
        m.heads.log_s = make_layer(hidden_dim, 1, Activation::identity,
                                   mix_seed(seed, kLogSStream));
        m.heads.rho_raw = make_layer(hidden_dim, 1, Activation::identity,
                                     mix_seed(seed, kRhoStream));
    }
    m.decoder.layers.push_back(
        make_layer(latent_dim, hidden_dim, Activation::relu, mix_seed(seed, kDecHiddenStream)));
    m.decoder.layers.push_back(
        make_layer(hidden_dim, input_dim, output_act, mix_seed(seed, kDecOutStream)));
    return m;
}

Posterior encode(const VaeModel& model, std::span<const double> x) {
    const std::vector<double> h = mlp_forward(model.encoder, x, 1, nullptr);
    std::vector<double> mu = layer_forward(model.heads.mu, h, 1, nullptr);
    if (model.kind() == PosteriorKind::diag) {
        std::vector<double> s = layer_forward(model.heads.logvar, h, 1, nullptr);
        for (double& v : s) v = squash_var(v);
        return DiagPosterior(std::move(mu), std::move(s));
    }
    const double log_s = layer_forward(model.heads.log_s, h, 1, nullptr)[0];
    const double rho_raw = layer_forward(model.heads.rho_raw, h, 1, nullptr)[0];
    return Ar1Posterior(std::move(mu), squash_rho(rho_raw), squash_var(log_s));
}

std::vector<double> decode(const VaeModel& model, std::span<const double> z) {
    return mlp_forward(model.decoder, z, 1, nullptr);
}

void VaeGrads::zero() {
    for (auto& g : encoder) g.zero();
    mu.zero();
    logvar.zero();
    log_s.zero();
    rho_raw.zero();
    for (auto& g : decoder) g.zero();
}

namespace {
LayerGrads zeros_like(const DenseLayer& layer) {
    LayerGrads g;
    g.w.assign(layer.w.size(), 0.0);
    g.b.assign(layer.b.size(), 0.0);
    return g;
}
}  // namespace

VaeGrads make_grads(const VaeModel& model) {
    VaeGrads g;
    for (const auto& l : model.encoder.layers) g.encoder.push_back(zeros_like(l));
    g.mu = zeros_like(model.heads.mu);
    if (model.kind() == PosteriorKind::diag) {
        g.logvar = zeros_like(model.heads.logvar);
    } else {
        g.log_s = zeros_like(model.heads.log_s);
        g.rho_raw = zeros_like(model.heads.rho_raw);
    }
    for (const auto& l : model.decoder.layers) g.decoder.push_back(zeros_like(l));
    return g;
}

namespace {

template <typename Layers, typename Out>
void push_views(Out& out, const std::string& prefix, Layers& layers) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        out.push_back({prefix + "." + std::to_string(i) + ".w", std::span<double>(layers[i].w)});
        out.push_back({prefix + "." + std::to_string(i) + ".b", std::span<double>(layers[i].b)});
    }
}

}  // namespace

std::vector<NamedParam> param_views(VaeModel& model) {
    std::vector<NamedParam> out;
    push_views(out, "encoder", model.encoder.layers);
    out.push_back({"heads.mu.w", std::span<double>(model.heads.mu.w)});
    out.push_back({"heads.mu.b", std::span<double>(model.heads.mu.b)});
    if (model.kind() == PosteriorKind::diag) {
        out.push_back({"heads.logvar.w", std::span<double>(model.heads.logvar.w)});
        out.push_back({"heads.logvar.b", std::span<double>(model.heads.logvar.b)});
    } else {
        out.push_back({"heads.log_s.w", std::span<double>(model.heads.log_s.w)});
        out.push_back({"heads.log_s.b", std::span<double>(model.heads.log_s.b)});
        out.push_back({"heads.rho_raw.w", std::span<double>(model.heads.rho_raw.w)});
        out.push_back({"heads.rho_raw.b", std::span<double>(model.heads.rho_raw.b)});
    }
    push_views(out, "decoder", model.decoder.layers);
    return out;
}

std::vector<NamedParam> grad_views(const VaeModel& model, VaeGrads& grads) {
    std::vector<NamedParam> out;
    push_views(out, "encoder", grads.encoder);
    out.push_back({"heads.mu.w", std::span<double>(grads.mu.w)});
    out.push_back({"heads.mu.b", std::span<double>(grads.mu.b)});
    if (model.kind() == PosteriorKind::diag) {
        out.push_back({"heads.logvar.w", std::span<double>(grads.logvar.w)});
        out.push_back({"heads.logvar.b", std::span<double>(grads.logvar.b)});
    } else {
        out.push_back({"heads.log_s.w", std::span<double>(grads.log_s.w)});
        out.push_back({"heads.log_s.b", std::span<double>(grads.log_s.b)});
        out.push_back({"heads.rho_raw.w", std::span<double>(grads.rho_raw.w)});
        out.push_back({"heads.rho_raw.b", std::span<double>(grads.rho_raw.b)});
    }
    push_views(out, "decoder", grads.decoder);
    return out;
}

AdamState make_adam(const VaeModel& model, AdamHyper hp) {
    AdamState st;
    st.hp = hp;
    auto views = param_views(const_cast<VaeModel&>(model));
    for (const auto& p : views) {
        st.m.emplace_back(p.data.size(), 0.0);
        st.v.emplace_back(p.data.size(), 0.0);
    }
    return st;
}

void adam_step(VaeModel& model, VaeGrads& grads, AdamState& state) {
    auto params = param_views(model);
    auto gviews = grad_views(model, grads);
    if (params.size() != gviews.size() || params.size() != state.m.size())
        throw std::invalid_argument("adam_step: parameter/gradient/state shape mismatch");
    ++state.step;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].data.size() != gviews[i].data.size())
            throw std::invalid_argument("adam_step: shape mismatch for " + params[i].name);
        kernels::adam_update(params[i].data, gviews[i].data, state.m[i], state.v[i],
                             state.hp.lr, state.hp.beta1, state.hp.beta2, state.hp.eps,
                             state.step);
    }
}

// ---- checkpoint io ----------------------------------------------------
// layout (little-endian):
//   "AVAE" | u32 version | u64 meta_len | meta bytes
//   | i32 input_dim | i32 hidden_dim | i32 latent_dim | u8 kind | u8 out_act
//   | u32 n_arrays | { u32 name_len | name | u64 count | count f64 } ...

namespace {

constexpr char kMagic[4] = {'A', 'V', 'A', 'E'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const VaeModel& model,
                     const std::string& meta_json) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    out.write(kMagic, 4);
    write_pod(out, kVersion);
    write_pod(out, static_cast<std::uint64_t>(meta_json.size()));
    out.write(meta_json.data(), static_cast<std::streamsize>(meta_json.size()));
    write_pod(out, static_cast<std::int32_t>(model.input_dim));
    write_pod(out, static_cast<std::int32_t>(model.hidden_dim));
    write_pod(out, static_cast<std::int32_t>(model.latent_dim));
    write_pod(out, static_cast<std::uint8_t>(model.kind()));
    write_pod(out, static_cast<std::uint8_t>(model.decoder.layers.back().act));
    auto views = param_views(const_cast<VaeModel&>(model));
    write_pod(out, static_cast<std::uint32_t>(views.size()));
    for (const auto& p : views) {
        write_pod(out, static_cast<std::uint32_t>(p.name.size()));
        out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        write_pod(out, static_cast<std::uint64_t>(p.data.size()));
        out.write(reinterpret_cast<const char*>(p.data.data()),
                  static_cast<std::streamsize>(p.data.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const auto version = read_pod<std::uint32_t>(in);
    if (version != kVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    const auto meta_len = read_pod<std::uint64_t>(in);
    std::string meta(meta_len, '\0');
    in.read(meta.data(), static_cast<std::streamsize>(meta_len));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    const auto input_dim = read_pod<std::int32_t>(in);
    const auto hidden_dim = read_pod<std::int32_t>(in);
    const auto latent_dim = read_pod<std::int32_t>(in);
    const auto kind = static_cast<PosteriorKind>(read_pod<std::uint8_t>(in));
    const auto out_act = static_cast<Activation>(read_pod<std::uint8_t>(in));

    Checkpoint ck;
    ck.meta_json = std::move(meta);
    ck.model = make_vae(input_dim, hidden_dim, latent_dim, kind, out_act, 0);
    auto views = param_views(ck.model);
    const auto n_arrays = read_pod<std::uint32_t>(in);
    if (n_arrays != views.size())
        throw std::runtime_error("checkpoint: array count mismatch");
    for (auto& p : views) {
        const auto name_len = read_pod<std::uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in || name != p.name)
            throw std::runtime_error("checkpoint: unexpected array '" + name + "'");
        const auto count = read_pod<std::uint64_t>(in);
        if (count != p.data.size())
            throw std::runtime_error("checkpoint: size mismatch for " + name);
        in.read(reinterpret_cast<char*>(p.data.data()),
                static_cast<std::streamsize>(count * sizeof(double)));
        if (!in) throw std::runtime_error("checkpoint: truncated file");
    }
    return ck;
}

}  // namespace arvae
