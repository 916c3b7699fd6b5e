#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <random>
#include <stdexcept>

#include "kadv/simd.hpp"

using namespace kadv;

namespace {

Eigen::VectorXd randvec(long n, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    Eigen::VectorXd v(n);
    for (long i = 0; i < n; ++i) v(i) = nd(rng);
    return v;
}

struct BackendGuard {
    std::string saved = simd::active_backend();
    ~BackendGuard() { simd::force_backend(saved); }
};

}  // namespace

TEST_CASE("active backend is a known name") {
    const std::string& b = simd::active_backend();
    CHECK((b == "scalar" || b == "avx2"));
}

TEST_CASE("force_backend rejects unknown names") {
    CHECK_THROWS_WITH(simd::force_backend("sse9"),
                      "simd backend unavailable: sse9");
}

TEST_CASE("scalar kernels match Eigen") {
    BackendGuard guard;
    simd::force_backend("scalar");
    std::mt19937_64 rng(1);
    for (long n : {1L, 2L, 3L, 7L, 64L, 129L}) {
        Eigen::VectorXd a = randvec(n, rng), b = randvec(n, rng),
                        w = randvec(n, rng);
        CHECK(simd::dot(a.data(), b.data(), n) ==
              doctest::Approx(a.dot(b)).epsilon(1e-13));
        CHECK(simd::weighted_dot(a.data(), b.data(), w.data(), n) ==
              doctest::Approx((a.array() * b.array() * w.array()).sum())
                  .epsilon(1e-13));
        CHECK(simd::sqdist(a.data(), b.data(), n) ==
              doctest::Approx((a - b).squaredNorm()).epsilon(1e-13));
    }
}

TEST_CASE("vector backend agrees with scalar to 1e-12 relative") {
    if (simd::active_backend() == "scalar") return;  // no SIMD on this host
    BackendGuard guard;
    std::mt19937_64 rng(2);
    for (long n : {1L, 4L, 5L, 31L, 32L, 33L, 1000L}) {
        Eigen::VectorXd a = randvec(n, rng), b = randvec(n, rng),
                        w = randvec(n, rng);
        simd::force_backend("scalar");
        double d0 = simd::dot(a.data(), b.data(), n);
        double w0 = simd::weighted_dot(a.data(), b.data(), w.data(), n);
        double s0 = simd::sqdist(a.data(), b.data(), n);
        simd::force_backend("avx2");
        CHECK(simd::dot(a.data(), b.data(), n) ==
              doctest::Approx(d0).epsilon(1e-12));
        CHECK(simd::weighted_dot(a.data(), b.data(), w.data(), n) ==
              doctest::Approx(w0).epsilon(1e-12));
        CHECK(simd::sqdist(a.data(), b.data(), n) ==
              doctest::Approx(s0).epsilon(1e-12));
    }
}

TEST_CASE("zero-length reductions are zero") {
    double x = 1.0;
    CHECK(simd::dot(&x, &x, 0) == 0.0);
    CHECK(simd::weighted_dot(&x, &x, &x, 0) == 0.0);
    CHECK(simd::sqdist(&x, &x, 0) == 0.0);
}
