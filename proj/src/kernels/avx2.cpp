// SPDX-License-Identifier: Apache-2.0
// Built with -mavx2 (see src/CMakeLists.txt); only entered after a runtime
// CPU check in dispatch.cpp.
#include <immintrin.h>

#include <cmath>
#include <limits>

#include "confreach/kernels/kernels.hpp"

namespace confreach::kernels::avx2 {

namespace {

constexpr std::int32_t kMaxVectorRegions = 64;

inline double vmin(double a, double b) { return a < b ? a : b; }
inline double vmax(double a, double b) { return a > b ? a : b; }

inline double hsum(__m256d v) {
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, v);
    return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

inline double hmax(__m256d v) {
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, v);
    return vmax(vmax(lanes[0], lanes[1]), vmax(lanes[2], lanes[3]));
}

}  // namespace

void abs_error(const double* y, const double* p, double* out, std::size_t n) {
    const __m256d sign = _mm256_set1_pd(-0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(p + i));
        _mm256_storeu_pd(out + i, _mm256_andnot_pd(sign, d));
    }
    for (; i < n; ++i) out[i] = std::fabs(y[i] - p[i]);
}

void bin_positions(const double* x, std::size_t n, const double* edges, std::size_t n_edges, std::int32_t* out) {
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d xv = _mm256_loadu_pd(x + i);
        __m256d count = _mm256_setzero_pd();
        for (std::size_t e = 0; e < n_edges; ++e) {
            const __m256d le = _mm256_cmp_pd(_mm256_set1_pd(edges[e]), xv, _CMP_LE_OQ);
            count = _mm256_add_pd(count, _mm256_and_pd(le, one));
        }
        _mm_storeu_si128(reinterpret_cast<__m128i*>(out + i), _mm256_cvtpd_epi32(count));
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
    __m256d acc[kMaxVectorRegions];
    for (std::int32_t r = 0; r < n_regions; ++r) acc[r] = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d rv = _mm256_cvtepi32_pd(_mm_loadu_si128(reinterpret_cast<const __m128i*>(idx + i)));
        const __m256d wv = _mm256_loadu_pd(w + i);
        for (std::int32_t r = 0; r < n_regions; ++r) {
            const __m256d m = _mm256_cmp_pd(rv, _mm256_set1_pd(static_cast<double>(r)), _CMP_EQ_OQ);
            acc[r] = _mm256_add_pd(acc[r], _mm256_and_pd(m, wv));
        }
    }
    for (std::int32_t r = 0; r < n_regions; ++r) sums[r] += hsum(acc[r]);
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
    const __m256d neg_inf = _mm256_set1_pd(-std::numeric_limits<double>::infinity());
    __m256d acc[kMaxVectorRegions];
    for (std::int32_t r = 0; r < n_regions; ++r) acc[r] = neg_inf;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d rv = _mm256_cvtepi32_pd(_mm_loadu_si128(reinterpret_cast<const __m128i*>(idx + i)));
        const __m256d vv = _mm256_loadu_pd(v + i);
        for (std::int32_t r = 0; r < n_regions; ++r) {
            const __m256d m = _mm256_cmp_pd(rv, _mm256_set1_pd(static_cast<double>(r)), _CMP_EQ_OQ);
            acc[r] = _mm256_max_pd(acc[r], _mm256_blendv_pd(neg_inf, vv, m));
        }
    }
    for (std::int32_t r = 0; r < n_regions; ++r) out[r] = vmax(out[r], hmax(acc[r]));
    for (; i < n; ++i) {
        const std::int32_t r = idx[i];
        if (r >= 0 && r < n_regions) out[r] = vmax(out[r], v[i]);
    }
}

void interval_affine(const double* w, const double* bias, std::size_t rows, std::size_t cols, const double* lo,
                     const double* hi, double* out_lo, double* out_hi) {
    std::size_t i = 0;
    for (; i + 4 <= rows; i += 4) {
        __m256d acc_lo = _mm256_loadu_pd(bias + i);
        __m256d acc_hi = acc_lo;
        for (std::size_t j = 0; j < cols; ++j) {
            const __m256d wv = _mm256_loadu_pd(w + j * rows + i);
            const __m256d a = _mm256_mul_pd(wv, _mm256_set1_pd(lo[j]));
            const __m256d b = _mm256_mul_pd(wv, _mm256_set1_pd(hi[j]));
            acc_lo = _mm256_add_pd(acc_lo, _mm256_min_pd(a, b));
            acc_hi = _mm256_add_pd(acc_hi, _mm256_max_pd(a, b));
        }
        _mm256_storeu_pd(out_lo + i, acc_lo);
        _mm256_storeu_pd(out_hi + i, acc_hi);
    }
    for (; i < rows; ++i) {
        double acc_lo = bias[i];
        double acc_hi = bias[i];
        for (std::size_t j = 0; j < cols; ++j) {
            const double wij = w[j * rows + i];
            const double a = wij * lo[j];
            const double b = wij * hi[j];
            acc_lo = acc_lo + vmin(a, b);
            acc_hi = acc_hi + vmax(a, b);
        }
        out_lo[i] = acc_lo;
        out_hi[i] = acc_hi;
    }
}

}  // namespace confreach::kernels::avx2
