// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "confreach/kernels/kernels.hpp"

namespace confreach::kernels::scalar {

namespace {
// Operand order matches vminpd/vmaxpd (second operand on ties and NaN).
inline double vmin(double a, double b) { return a < b ? a : b; }
inline double vmax(double a, double b) { return a > b ? a : b; }
}  // namespace

void abs_error(const double* y, const double* p, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::fabs(y[i] - p[i]);
}

void bin_positions(const double* x, std::size_t n, const double* edges, std::size_t n_edges, std::int32_t* out) {
    for (std::size_t i = 0; i < n; ++i) {
        std::int32_t c = 0;
        for (std::size_t e = 0; e < n_edges; ++e) c += (edges[e] <= x[i]) ? 1 : 0;
        out[i] = c;
    }
}

void region_sums(const std::int32_t* idx, const double* w, std::size_t n, std::int32_t n_regions, double* sums) {
    for (std::size_t i = 0; i < n; ++i) {
        const std::int32_t r = idx[i];
        if (r >= 0 && r < n_regions) sums[r] += w[i];
    }
}

void region_max(const std::int32_t* idx, const double* v, std::size_t n, std::int32_t n_regions, double* out) {
    for (std::size_t i = 0; i < n; ++i) {
        const std::int32_t r = idx[i];
        if (r >= 0 && r < n_regions) out[r] = vmax(out[r], v[i]);
    }
}

void interval_affine(const double* w, const double* bias, std::size_t rows, std::size_t cols, const double* lo,
                     const double* hi, double* out_lo, double* out_hi) {
    for (std::size_t i = 0; i < rows; ++i) {
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

}  // namespace confreach::kernels::scalar
