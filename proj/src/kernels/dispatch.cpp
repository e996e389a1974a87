// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "confreach/kernels/kernels.hpp"

namespace confreach::kernels {

namespace {

#define CONFREACH_TABLE(ns, tag) \
    KernelTable { tag, &ns::abs_error, &ns::bin_positions, &ns::region_sums, &ns::region_max, &ns::interval_affine }

const KernelTable kScalar = CONFREACH_TABLE(scalar, Backend::Scalar);
#if defined(CONFREACH_HAVE_AVX2_KERNELS)
const KernelTable kAvx2 = CONFREACH_TABLE(avx2, Backend::Avx2);
#endif
#if defined(CONFREACH_HAVE_NEON_KERNELS)
const KernelTable kNeon = CONFREACH_TABLE(neon, Backend::Neon);
#endif

#undef CONFREACH_TABLE

bool cpu_has_avx2() noexcept {
#if defined(CONFREACH_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

Backend best_backend() {
    if (const char* env = std::getenv("CONFREACH_SIMD")) {
        const std::string v(env);
        if (v == "scalar") return Backend::Scalar;
        if (v == "avx2" && available(Backend::Avx2)) return Backend::Avx2;
        if (v == "neon" && available(Backend::Neon)) return Backend::Neon;
    }
    if (available(Backend::Avx2)) return Backend::Avx2;
    if (available(Backend::Neon)) return Backend::Neon;
    return Backend::Scalar;
}

std::atomic<const KernelTable*>& current() {
    static std::atomic<const KernelTable*> ptr{&table(best_backend())};
    return ptr;
}

}  // namespace

std::string_view backend_name(Backend b) noexcept {
    switch (b) {
        case Backend::Scalar: return "scalar";
        case Backend::Avx2: return "avx2";
        case Backend::Neon: return "neon";
    }
    return "unknown";
}

bool available(Backend b) noexcept {
    switch (b) {
        case Backend::Scalar: return true;
        case Backend::Avx2: return cpu_has_avx2();
        case Backend::Neon:
#if defined(CONFREACH_HAVE_NEON_KERNELS)
            return true;
#else
            return false;
#endif
    }
    return false;
}

const KernelTable& table(Backend b) {
    if (!available(b)) throw std::invalid_argument("SIMD backend not available: " + std::string(backend_name(b)));
    switch (b) {
#if defined(CONFREACH_HAVE_AVX2_KERNELS)
        case Backend::Avx2: return kAvx2;
#endif
#if defined(CONFREACH_HAVE_NEON_KERNELS)
        case Backend::Neon: return kNeon;
#endif
        default: return kScalar;
    }
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

void select(Backend b) { current().store(&table(b), std::memory_order_release); }

void abs_error(std::span<const double> y, std::span<const double> p, std::span<double> out) {
    if (y.size() != p.size() || out.size() != y.size()) throw std::invalid_argument("abs_error: size mismatch");
    active().abs_error(y.data(), p.data(), out.data(), y.size());
}

void bin_positions(std::span<const double> x, std::span<const double> edges, std::span<std::int32_t> out) {
    if (out.size() != x.size()) throw std::invalid_argument("bin_positions: size mismatch");
    active().bin_positions(x.data(), x.size(), edges.data(), edges.size(), out.data());
}

void region_sums(std::span<const std::int32_t> idx, std::span<const double> w, std::span<double> sums) {
    if (idx.size() != w.size()) throw std::invalid_argument("region_sums: size mismatch");
    active().region_sums(idx.data(), w.data(), idx.size(), static_cast<std::int32_t>(sums.size()), sums.data());
}

void region_max(std::span<const std::int32_t> idx, std::span<const double> v, std::span<double> out) {
    if (idx.size() != v.size()) throw std::invalid_argument("region_max: size mismatch");
    active().region_max(idx.data(), v.data(), idx.size(), static_cast<std::int32_t>(out.size()), out.data());
}

}  // namespace confreach::kernels
