#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "arvae/data_io.hpp"

using namespace arvae;

namespace {

// lag-1 product-moment correlation over consecutive pairs within each row
double row_lag1_corr(const std::vector<double>& field, int count, int side) {
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (int i = 0; i < count; ++i)
        for (int r = 0; r < side; ++r) {
            const double* row = field.data() + (static_cast<std::size_t>(i) * side + r) * side;
            for (int c = 0; c + 1 < side; ++c) {
                sxy += row[c] * row[c + 1];
                sxx += row[c] * row[c];
                syy += row[c + 1] * row[c + 1];
            }
        }
    return sxy / std::sqrt(sxx * syy);
}

// same statistic between vertical neighbours, which should be uncorrelated
double col_lag1_corr(const std::vector<double>& field, int count, int side) {
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (int i = 0; i < count; ++i) {
        const double* img = field.data() + static_cast<std::size_t>(i) * side * side;
        for (int r = 0; r + 1 < side; ++r)
            for (int c = 0; c < side; ++c) {
                const double a = img[r * side + c], b = img[(r + 1) * side + c];
                sxy += a * b;
                sxx += a * a;
                syy += b * b;
            }
    }
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace

TEST_CASE("read_idx_images parses a minimal hand-built stream") {
    const std::vector<unsigned char> bytes = {0, 0, 8, 3, 0, 0, 0, 1, 0, 0,
                                              0, 1, 0, 0, 0, 1, 0xFF};
    const Dataset ds = read_idx_images(bytes, Split::test);
    CHECK(ds.count == 1);
    CHECK(ds.rows == 1);
    CHECK(ds.cols == 1);
    CHECK(ds.split == Split::test);
    REQUIRE(ds.images.size() == 1);
    CHECK(ds.images[0] == doctest::Approx(1.0));
}

TEST_CASE("read_idx_images rejects malformed streams") {
    const std::vector<unsigned char> bad_magic = {0, 0, 8, 1, 0, 0, 0, 1, 0, 0,
                                                  0, 1, 0, 0, 0, 1, 0xFF};
    CHECK_THROWS_AS(read_idx_images(bad_magic, Split::train), std::runtime_error);

    const std::vector<unsigned char> short_header = {0, 0, 8, 3, 0, 0};
    CHECK_THROWS_AS(read_idx_images(short_header, Split::train), std::runtime_error);

    // header promises 2 images but carries bytes for one pixel only
    const std::vector<unsigned char> short_payload = {0, 0, 8, 3, 0, 0, 0, 2, 0, 0,
                                                      0, 1, 0, 0, 0, 1, 0xFF};
    CHECK_THROWS_AS(read_idx_images(short_payload, Split::train), std::runtime_error);

    CHECK_THROWS_AS(read_idx_file("/nonexistent/path.idx", Split::train), std::runtime_error);
}

TEST_CASE("write_idx_images inverts read_idx_images byte for byte") {
    std::vector<unsigned char> bytes = {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2};
    for (unsigned char v : {0, 17, 255, 128, 1, 254, 63, 200}) bytes.push_back(v);
    const Dataset ds = read_idx_images(bytes, Split::train);
    CHECK(write_idx_images(ds) == bytes);
}

TEST_CASE("synthetic images are deterministic per seed and live in (0, 1)") {
    const Dataset a = synth_correlated(6, 8, 0.8, 99, Split::train);
    const Dataset b = synth_correlated(6, 8, 0.8, 99, Split::train);
    const Dataset c = synth_correlated(6, 8, 0.8, 100, Split::train);
    CHECK(a.count == 6);
    CHECK(a.rows == 8);
    CHECK(a.cols == 8);
    CHECK(a.images == b.images);
    CHECK(a.images != c.images);
    for (double v : a.images) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }

    // the image accessor addresses the right slice
    const std::span<const double> img1 = a.image(1);
    REQUIRE(img1.size() == 64);
    CHECK(img1[0] == a.images[64]);

    CHECK_THROWS_AS(synth_correlated(4, 8, 1.0, 1, Split::train), std::invalid_argument);
    CHECK_THROWS_AS(synth_correlated(4, 8, -1.5, 1, Split::train), std::invalid_argument);
}

TEST_CASE("generator field carries the requested row correlation") {
    constexpr int count = 200, side = 8;  // 200 * 8 * 7 = 11200 lag pairs
    const std::vector<double> strong = synth_correlated_field(count, side, 0.9, 7);
    CHECK(std::abs(row_lag1_corr(strong, count, side) - 0.9) < 0.05);
    CHECK(std::abs(col_lag1_corr(strong, count, side)) < 0.05);

    const std::vector<double> flat = synth_correlated_field(count, side, 0.0, 8);
    CHECK(std::abs(row_lag1_corr(flat, count, side)) < 0.05);
}

TEST_CASE("batches cover the index range in seeded shuffled slices") {
    const auto bs = batches(5, 2, 123);
    REQUIRE(bs.size() == 3);
    CHECK(bs[0].size() == 2);
    CHECK(bs[1].size() == 2);
    CHECK(bs[2].size() == 1);
    std::set<std::size_t> seen;
    for (const auto& b : bs) seen.insert(b.begin(), b.end());
    CHECK(seen == std::set<std::size_t>{0, 1, 2, 3, 4});

    // oversize batch degenerates to a single full slice
    const auto whole = batches(3, 10, 1);
    REQUIRE(whole.size() == 1);
    CHECK(whole[0].size() == 3);

    CHECK(batches(64, 8, 42) == batches(64, 8, 42));
    CHECK(batches(64, 8, 42) != batches(64, 8, 43));

    // shuffled, not identity order, for a comfortably large count
    const auto big = batches(64, 64, 4242)[0];
    std::vector<std::size_t> identity(64);
    for (std::size_t i = 0; i < 64; ++i) identity[i] = i;
    CHECK(big != identity);
}
