#include "arvae/data_io.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "arvae/ar1.hpp"
#include "arvae/rng.hpp"

namespace arvae {

namespace {

constexpr std::uint32_t kIdxImageMagic = 0x00000803;

std::uint32_t read_u32_be(const unsigned char* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void write_u32_be(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v >> 24));
    out.push_back(static_cast<unsigned char>(v >> 16));
    out.push_back(static_cast<unsigned char>(v >> 8));
    out.push_back(static_cast<unsigned char>(v));
}

}  // namespace

Dataset read_idx_images(std::span<const unsigned char> bytes, Split split) {
    if (bytes.size() < 16) throw std::runtime_error("idx: truncated payload (header)");
    const std::uint32_t magic = read_u32_be(bytes.data());
    if (magic != kIdxImageMagic)
        throw std::runtime_error("idx: unexpected magic 0x" + [&] {
            char buf[16];
            std::snprintf(buf, sizeof(buf), "%08x", magic);
            return std::string(buf);
        }());
    Dataset ds;
    ds.split = split;
    ds.count = static_cast<int>(read_u32_be(bytes.data() + 4));
    ds.rows = static_cast<int>(read_u32_be(bytes.data() + 8));
    ds.cols = static_cast<int>(read_u32_be(bytes.data() + 12));
    if (ds.count < 0 || ds.rows <= 0 || ds.cols <= 0)
        throw std::runtime_error("idx: invalid dimensions in header");
    const std::size_t need = static_cast<std::size_t>(ds.count) * ds.rows * ds.cols;
    if (bytes.size() - 16 < need) throw std::runtime_error("idx: truncated payload");
    ds.images.resize(need);
    const unsigned char* px = bytes.data() + 16;
    for (std::size_t i = 0; i < need; ++i) ds.images[i] = static_cast<double>(px[i]) / 255.0;
    return ds;
}

Dataset read_idx_file(const std::string& path, Split split) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("idx: cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return read_idx_images(bytes, split);
}

std::vector<unsigned char> write_idx_images(const Dataset& ds) {
    std::vector<unsigned char> out;
    out.reserve(16 + ds.images.size());
    write_u32_be(out, kIdxImageMagic);
    write_u32_be(out, static_cast<std::uint32_t>(ds.count));
    write_u32_be(out, static_cast<std::uint32_t>(ds.rows));
    write_u32_be(out, static_cast<std::uint32_t>(ds.cols));
    for (double v : ds.images) {
        const double scaled = std::round(255.0 * v);
        out.push_back(static_cast<unsigned char>(std::min(255.0, std::max(0.0, scaled))));
    }
    return out;
}

std::vector<double> synth_correlated_field(int count, int side, double rho_pix,
                                           std::uint64_t seed) {
    if (side < 1) throw std::invalid_argument("synth_correlated: side must be >= 1");
    if (!(std::abs(rho_pix) < 1.0))
        throw std::invalid_argument("synth_correlated: |rho_pix| must be < 1");
    const int n = side * side;
    std::vector<double> field(static_cast<std::size_t>(count) * n);
    // Each row is an independent AR(1) chain with lag-1 correlation rho_pix.
    // Row variance 4.0 puts the pixel std at 2.0, enough sigmoid saturation
    // for contrasty images instead of mid-gray mush.
    const Ar1Cov row_chain(side, rho_pix, 4.0);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < count; ++i) {
        NormalRng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
        std::vector<double> eps(n);
        rng.fill_normal(eps);
        double* img = field.data() + static_cast<std::size_t>(i) * n;
        for (int r = 0; r < side; ++r)
            color(row_chain, {eps.data() + static_cast<std::size_t>(r) * side,
                              static_cast<std::size_t>(side)},
                  {img + static_cast<std::size_t>(r) * side, static_cast<std::size_t>(side)});
    }
    return field;
}

Dataset synth_correlated(int count, int side, double rho_pix, std::uint64_t seed, Split split) {
    Dataset ds;
    ds.count = count;
    ds.rows = side;
    ds.cols = side;
    ds.split = split;
    ds.images = synth_correlated_field(count, side, rho_pix, seed);
    for (double& v : ds.images) v = 1.0 / (1.0 + std::exp(-v));
    return ds;
}

std::vector<std::vector<std::size_t>> batches(std::size_t count, std::size_t batch_size,
                                              std::uint64_t epoch_seed) {
    if (batch_size < 1) throw std::invalid_argument("batches: batch_size must be >= 1");
    std::vector<std::size_t> perm(count);
    for (std::size_t i = 0; i < count; ++i) perm[i] = i;
    // Fisher-Yates with a derived stream
    std::uint64_t state = mix_seed(epoch_seed, 0x62617463ULL);
    for (std::size_t i = count; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(splitmix64(state) % i);
        std::swap(perm[i - 1], perm[j]);
    }
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start < count; start += batch_size) {
        const std::size_t end = std::min(count, start + batch_size);
        out.emplace_back(perm.begin() + start, perm.begin() + end);
    }
    return out;
}

}  // namespace arvae
