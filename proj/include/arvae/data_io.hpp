#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace arvae {

enum class Split { train, test };

// Flattened image collection with per-pixel values in [0, 1].
struct Dataset {
    int count = 0;
    int rows = 0;
    int cols = 0;
    std::vector<double> images;  // count * rows * cols, row-major per image
    Split split = Split::train;

    int pixels() const { return rows * cols; }
    std::span<const double> image(int i) const {
        return {images.data() + static_cast<std::size_t>(i) * pixels(),
                static_cast<std::size_t>(pixels())};
    }
};

// Parse an IDX image stream: big-endian magic 0x00000803, then u32 count,
// rows, cols, then count*rows*cols raw pixel bytes scaled into [0, 1].
Dataset read_idx_images(std::span<const unsigned char> bytes, Split split);
Dataset read_idx_file(const std::string& path, Split split);

// Serialize back to IDX bytes, pixel = round(255 * value).
std::vector<unsigned char> write_idx_images(const Dataset& ds);

// Synthetic correlated images: each image is a row-wise AR(1) Gaussian field
// (every row an independent AR(1) chain with lag-1 correlation rho_pix)
// squashed through a logistic sigmoid into (0, 1). Deterministic per seed;
// image i uses the derived stream mix_seed(seed, i).
Dataset synth_correlated(int count, int side, double rho_pix, std::uint64_t seed, Split split);

// The pre-squash Gaussian field behind synth_correlated, for estimator tests.
std::vector<double> synth_correlated_field(int count, int side, double rho_pix,
                                           std::uint64_t seed);

// Seeded shuffle of [0, count) chopped into batch_size slices; the last slice
// may be short, and the union of slices is exactly [0, count).
std::vector<std::vector<std::size_t>> batches(std::size_t count, std::size_t batch_size,
                                              std::uint64_t epoch_seed);

}  // namespace arvae
