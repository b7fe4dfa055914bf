#include <doctest.h>

#include <cmath>
#include <vector>

#include "cgro/rng.hpp"

using namespace cgro;

TEST_CASE("rng: identical seeds give identical sequences") {
    Rng a(123), b(123);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("rng: derived streams differ by role and index") {
    const auto s1 = derive_stream(42, "data.example", 0);
    const auto s2 = derive_stream(42, "data.example", 1);
    const auto s3 = derive_stream(42, "init", 0);
    const auto s4 = derive_stream(43, "data.example", 0);
    CHECK(s1 != s2);
    CHECK(s1 != s3);
    CHECK(s1 != s4);
    CHECK(s1 == derive_stream(42, "data.example", 0));
}

TEST_CASE("rng: normal moments") {
    Rng rng(7);
    const int n = 200000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sum2 += x * x;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean) < 5.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(var - 1.0) < 5.0 * std::sqrt(2.0 / n));
}

TEST_CASE("rng: uniform bounds") {
    Rng rng(9);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        CHECK(rng.uniform_index(7) < 7);
    }
}
