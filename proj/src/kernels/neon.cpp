// SPDX-License-Identifier: Apache-2.0
// AArch64 Advanced SIMD variants. FMIN/FMAX order signed zeros, so results
// match the scalar reference under == rather than bitwise.
#include "confreach/kernels/kernels.hpp"

#if defined(CONFREACH_HAVE_NEON_KERNELS)

#include <arm_neon.h>

#include <cmath>
#include <limits>

namespace confreach::kernels::neon {

namespace {

constexpr std::int32_t kMaxVectorRegions = 64;

inline double vmax1(double a, double b) { return a > b ? a : b; }
inline double vmin1(double a, double b) { return a < b ? a : b; }

inline float64x2_t load_index_pair(const std::int32_t* idx) {
    const int32x2_t i32 = vld1_s32(idx);
    return vcvtq_f64_s64(vmovl_s32(i32));
}

}  // namespace

void abs_error(const double* y, const double* p, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vabdq_f64(vld1q_f64(y + i), vld1q_f64(p + i)));
    for (; i < n; ++i) out[i] = std::fabs(y[i] - p[i]);
}

void bin_positions(const double* x, std::size_t n, const double* edges, std::size_t n_edges, std::int32_t* out) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t xv = vld1q_f64(x + i);
        uint64x2_t count = vdupq_n_u64(0);
        for (std::size_t e = 0; e < n_edges; ++e) {
            // all-ones lanes are -1 as integers
            count = vsubq_u64(count, vcleq_f64(vdupq_n_f64(edges[e]), xv));
        }
        vst1_s32(out + i, vreinterpret_s32_u32(vmovn_u64(count)));
    }
    for (; i < n; ++i) {
        std::int32_t c = 0;
        for (std::size_t e = 0; e < n_edges; ++e) c += (edges[e] <= x[i]) ? 1 : 0;
        out[i] = c;
    }
}

void region_sums(const std::int32_t* idx, const double* w, std::size_t n, std::int32_t n_regions, double* sums) {
    if (n_regions <= 0) return;
    if (n_regions > kMaxVectorRegions) {
        scalar::region_sums(idx, w, n, n_regions, sums);
        return;
    }
    float64x2_t acc[kMaxVectorRegions];
    for (std::int32_t r = 0; r < n_regions; ++r) acc[r] = vdupq_n_f64(0.0);
    const float64x2_t zero = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t rv = load_index_pair(idx + i);
        const float64x2_t wv = vld1q_f64(w + i);
        for (std::int32_t r = 0; r < n_regions; ++r) {
            const uint64x2_t m = vceqq_f64(rv, vdupq_n_f64(static_cast<double>(r)));
            acc[r] = vaddq_f64(acc[r], vbslq_f64(m, wv, zero));
        }
    }
    for (std::int32_t r = 0; r < n_regions; ++r) sums[r] += vgetq_lane_f64(acc[r], 0) + vgetq_lane_f64(acc[r], 1);
    for (; i < n; ++i) {
        const std::int32_t r = idx[i];
        if (r >= 0 && r < n_regions) sums[r] += w[i];
    }
}

void region_max(const std::int32_t* idx, const double* v, std::size_t n, std::int32_t n_regions, double* out) {
    if (n_regions <= 0) return;
    if (n_regions > kMaxVectorRegions) {
        scalar::region_max(idx, v, n, n_regions, out);
        return;
    }
    const float64x2_t neg_inf = vdupq_n_f64(-std::numeric_limits<double>::infinity());
    float64x2_t acc[kMaxVectorRegions];
    for (std::int32_t r = 0; r < n_regions; ++r) acc[r] = neg_inf;
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t rv = load_index_pair(idx + i);
        const float64x2_t vv = vld1q_f64(v + i);
        for (std::int32_t r = 0; r < n_regions; ++r) {
            const uint64x2_t m = vceqq_f64(rv, vdupq_n_f64(static_cast<double>(r)));
            acc[r] = vmaxq_f64(acc[r], vbslq_f64(m, vv, neg_inf));
        }
    }
    for (std::int32_t r = 0; r < n_regions; ++r) {
        out[r] = vmax1(out[r], vmax1(vgetq_lane_f64(acc[r], 0), vgetq_lane_f64(acc[r], 1)));
    }
    for (; i < n; ++i) {
        const std::int32_t r = idx[i];
        if (r >= 0 && r < n_regions) out[r] = vmax1(out[r], v[i]);
    }
}

void interval_affine(const double* w, const double* bias, std::size_t rows, std::size_t cols, const double* lo,
                     const double* hi, double* out_lo, double* out_hi) {
    std::size_t i = 0;
    for (; i + 2 <= rows; i += 2) {
        float64x2_t acc_lo = vld1q_f64(bias + i);
        float64x2_t acc_hi = acc_lo;
        for (std::size_t j = 0; j < cols; ++j) {
            const float64x2_t wv = vld1q_f64(w + j * rows + i);
            const float64x2_t a = vmulq_n_f64(wv, lo[j]);
            const float64x2_t b = vmulq_n_f64(wv, hi[j]);
            acc_lo = vaddq_f64(acc_lo, vminq_f64(a, b));
            acc_hi = vaddq_f64(acc_hi, vmaxq_f64(a, b));
        }
        vst1q_f64(out_lo + i, acc_lo);
        vst1q_f64(out_hi + i, acc_hi);
    }
    for (; i < rows; ++i) {
        double acc_lo = bias[i];
        double acc_hi = bias[i];
        for (std::size_t j = 0; j < cols; ++j) {
            const double wij = w[j * rows + i];
            acc_lo = acc_lo + vmin1(wij * lo[j], wij * hi[j]);
            acc_hi = acc_hi + vmax1(wij * lo[j], wij * hi[j]);
        }
        out_lo[i] = acc_lo;
        out_hi[i] = acc_hi;
    }
}

}  // namespace confreach::kernels::neon

#endif
