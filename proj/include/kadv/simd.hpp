#pragma once
// Runtime-dispatched inner loops for the dense kernel algebra.  A scalar
// reference implementation always exists; on x86-64 an AVX2+FMA variant is
// selected at startup when the CPU supports it.  Both variants accumulate in
// the same order blockwise so results agree to within usual FP reassociation;
// the test suite checks agreement to 1e-12 relative.

#include <cstddef>
#include <string>

namespace kadv::simd {

// Backend identifier actually in use ("scalar", "avx2").
const std::string& active_backend();

// Force a specific backend ("scalar" or "avx2"); throws if unavailable.
// Intended for the equivalence tests.
void force_backend(const std::string& name);

// sum_i a[i]*b[i]
double dot(const double* a, const double* b, std::size_t n);

// sum_i w[i]*a[i]*b[i]
double weighted_dot(const double* a, const double* b, const double* w,
                    std::size_t n);

// sum_i (a[i]-b[i])^2
double sqdist(const double* a, const double* b, std::size_t n);

}  // namespace kadv::simd
