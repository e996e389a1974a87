// SPDX-License-Identifier: Apache-2.0
#pragma once

// Data-parallel inner loops used by calibration, loss evaluation and
// interval network propagation. Every kernel has a scalar reference
// implementation; vector variants are selected at runtime and are
// equivalence-tested against it.
//
// region_sums is the only kernel whose vector variants reassociate a sum,
// so its results agree with the scalar reference to rounding only. All other
// kernels are bit-identical across backends.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace confreach::kernels {

enum class Backend { Scalar, Avx2, Neon };

std::string_view backend_name(Backend b) noexcept;

#define CONFREACH_KERNEL_DECLS                                                                       \
    /* out[i] = |y[i] - p[i]| */                                                                     \
    void abs_error(const double* y, const double* p, double* out, std::size_t n);                   \
    /* out[i] = #{ e in edges : e <= x[i] } (edges sorted ascending) */                               \
    void bin_positions(const double* x, std::size_t n, const double* edges, std::size_t n_edges,     \
                       std::int32_t* out);                                                           \
    /* sums[r] += sum of w[i] with idx[i] == r */                                                    \
    void region_sums(const std::int32_t* idx, const double* w, std::size_t n, std::int32_t n_regions, \
                     double* sums);                                                                  \
    /* out[r] = max(out[r], max of v[i] with idx[i] == r) */                                         \
    void region_max(const std::int32_t* idx, const double* v, std::size_t n, std::int32_t n_regions, \
                    double* out);                                                                    \
    /* Interval image of x -> W x + b for x in [lo, hi]; W is column-major rows x cols. */           \
    void interval_affine(const double* w, const double* bias, std::size_t rows, std::size_t cols,    \
                         const double* lo, const double* hi, double* out_lo, double* out_hi);

namespace scalar {
CONFREACH_KERNEL_DECLS
}
#if defined(__x86_64__) || defined(_M_X64)
#define CONFREACH_HAVE_AVX2_KERNELS 1
namespace avx2 {
CONFREACH_KERNEL_DECLS
}
#endif
#if defined(__aarch64__) || defined(__ARM_NEON)
#define CONFREACH_HAVE_NEON_KERNELS 1
namespace neon {
CONFREACH_KERNEL_DECLS
}
#endif

#undef CONFREACH_KERNEL_DECLS

struct KernelTable {
    Backend backend;
    void (*abs_error)(const double*, const double*, double*, std::size_t);
    void (*bin_positions)(const double*, std::size_t, const double*, std::size_t, std::int32_t*);
    void (*region_sums)(const std::int32_t*, const double*, std::size_t, std::int32_t, double*);
    void (*region_max)(const std::int32_t*, const double*, std::size_t, std::int32_t, double*);
    void (*interval_affine)(const double*, const double*, std::size_t, std::size_t, const double*,
                            const double*, double*, double*);
};

// Whether the backend was compiled in and the running CPU supports it.
bool available(Backend b) noexcept;

// Table for a specific backend; throws std::invalid_argument when unavailable.
const KernelTable& table(Backend b);

// Best available backend, unless overridden by select() or by the
// CONFREACH_SIMD environment variable (scalar | avx2 | neon).
const KernelTable& active();
void select(Backend b);

// Span front-ends over active().
void abs_error(std::span<const double> y, std::span<const double> p, std::span<double> out);
void bin_positions(std::span<const double> x, std::span<const double> edges, std::span<std::int32_t> out);
void region_sums(std::span<const std::int32_t> idx, std::span<const double> w, std::span<double> sums);
void region_max(std::span<const std::int32_t> idx, std::span<const double> v, std::span<double> out);

}  // namespace confreach::kernels
