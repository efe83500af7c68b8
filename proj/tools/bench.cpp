#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "arvae/kernels.hpp"
#include "arvae/rng.hpp"

// Times each batched kernel against its serial reference and verifies the
// outputs are bit-identical, which is the contract the training loop relies
// on for thread-count-independent results.

namespace {

using arvae::NormalRng;
namespace k = arvae::kernels;

double time_best_ms(const std::function<void()>& fn, int reps) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

bool bit_identical(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

void report(const char* name, double serial_ms, double parallel_ms, bool identical) {
    std::printf("%-14s %10.3f ms %10.3f ms %8.2fx   %s\n", name, serial_ms, parallel_ms,
                serial_ms / parallel_ms, identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main() {
    constexpr int m = 256, n = 512, kk = 784;
    constexpr int reps = 5;

    NormalRng rng(42);
    std::vector<double> a(static_cast<std::size_t>(m) * kk);
    std::vector<double> b(static_cast<std::size_t>(n) * kk);
    std::vector<double> bt(static_cast<std::size_t>(kk) * n);
    rng.fill_normal(a);
    rng.fill_normal(b);
    rng.fill_normal(bt);
    std::vector<double> c_ser(static_cast<std::size_t>(m) * n);
    std::vector<double> c_par(c_ser.size());

#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (built without OpenMP)\n");
#endif
    std::printf("%-14s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

    report("gemm_nt",
           time_best_ms([&] { k::serial::gemm_nt(a, b, c_ser, m, n, kk); }, reps),
           time_best_ms([&] { k::gemm_nt(a, b, c_par, m, n, kk); }, reps),
           bit_identical(c_ser, c_par));

    std::vector<double> ab(static_cast<std::size_t>(m) * kk);
    std::vector<double> ab_par(ab.size());
    report("gemm_nn",
           time_best_ms([&] { k::serial::gemm_nn(c_ser, bt, ab, m, kk, n); }, reps),
           time_best_ms([&] { k::gemm_nn(c_par, bt, ab_par, m, kk, n); }, reps),
           bit_identical(ab, ab_par));

    std::vector<double> gt(static_cast<std::size_t>(kk) * n);
    std::vector<double> gt_par(gt.size());
    report("gemm_tn",
           time_best_ms([&] { k::serial::gemm_tn(a, c_ser, gt, m, kk, n); }, reps),
           time_best_ms([&] { k::gemm_tn(a, c_par, gt_par, m, kk, n); }, reps),
           bit_identical(gt, gt_par));

    std::vector<double> cs(n), cs_par(n);
    report("col_sums",
           time_best_ms([&] { k::serial::col_sums(c_ser, cs, m, n); }, reps),
           time_best_ms([&] { k::col_sums(c_par, cs_par, m, n); }, reps),
           bit_identical(cs, cs_par));

    const std::size_t pn = 1u << 21;
    std::vector<double> p1(pn, 0.5), g(pn), m1(pn, 0.0), v1(pn, 0.0);
    std::vector<double> p2(p1), m2(m1), v2(v1);
    rng.fill_normal(g);
    report("adam_update",
           time_best_ms([&] { k::serial::adam_update(p1, g, m1, v1, 1e-3, 0.9, 0.999, 1e-8, 1); },
                        reps),
           time_best_ms([&] { k::adam_update(p2, g, m2, v2, 1e-3, 0.9, 0.999, 1e-8, 1); }, reps),
           bit_identical(p1, p2));

    return 0;
}
