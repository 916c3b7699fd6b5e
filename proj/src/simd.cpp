#include "kadv/simd.hpp"

#include <stdexcept>

#if defined(__x86_64__) || defined(_M_X64)
#define KADV_X86 1
#include <immintrin.h>
#endif

namespace kadv::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double wdot_scalar(const double* a, const double* b, const double* w,
                   std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += w[i] * a[i] * b[i];
    return acc;
}

double sqdist_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

#if KADV_X86
double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                              acc);
    double out = hsum(acc);
    for (; i < n; ++i) out += a[i] * b[i];
    return out;
}

double wdot_avx2(const double* a, const double* b, const double* w,
                 std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d ab = _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                   _mm256_loadu_pd(b + i));
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(w + i), ab, acc);
    }
    double out = hsum(acc);
    for (; i < n; ++i) out += w[i] * a[i] * b[i];
    return out;
}

double sqdist_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i),
                                  _mm256_loadu_pd(b + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double out = hsum(acc);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        out += d * d;
    }
    return out;
}

bool have_avx2() { return __builtin_cpu_supports("avx2") &&
                          __builtin_cpu_supports("fma"); }
#endif

struct Dispatch {
    std::string name;
    double (*dot)(const double*, const double*, std::size_t);
    double (*wdot)(const double*, const double*, const double*, std::size_t);
    double (*sqd)(const double*, const double*, std::size_t);
};

const Dispatch kScalar{"scalar", dot_scalar, wdot_scalar, sqdist_scalar};
#if KADV_X86
const Dispatch kAvx2{"avx2", dot_avx2, wdot_avx2, sqdist_avx2};
#endif

Dispatch pick_default() {
#if KADV_X86
    if (have_avx2()) return kAvx2;
#endif
    return kScalar;
}

Dispatch g_active = pick_default();

}  // namespace

const std::string& active_backend() { return g_active.name; }

void force_backend(const std::string& name) {
    if (name == "scalar") {
        g_active = kScalar;
        return;
    }
#if KADV_X86
    if (name == "avx2" && have_avx2()) {
        g_active = kAvx2;
        return;
    }
#endif
    throw std::runtime_error("simd backend unavailable: " + name);
}

double dot(const double* a, const double* b, std::size_t n) {
    return g_active.dot(a, b, n);
}

double weighted_dot(const double* a, const double* b, const double* w,
                    std::size_t n) {
    return g_active.wdot(a, b, w, n);
}

double sqdist(const double* a, const double* b, std::size_t n) {
    return g_active.sqd(a, b, n);
}

}  // namespace kadv::simd
