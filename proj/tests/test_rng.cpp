#include <doctest.h>

#include <cmath>

#include "flowbank/rng.hpp"

using namespace flowbank::rng;

TEST_CASE("identical seeds reproduce the exact draw sequence") {
    RandomStream a(1234), b(1234);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.next_u64() == b.next_u64());
        CHECK(a.uniform01() == b.uniform01());
        CHECK(a.normal() == b.normal());
    }
}

TEST_CASE("mix separates nearby keys") {
    CHECK(mix(1, 0) != mix(1, 1));
    CHECK(mix(1, 0) != mix(2, 0));
    CHECK(mix(0, 0) != 0);
    // sequential tags under one base key stay distinct
    for (std::uint64_t t = 0; t < 16; ++t)
        for (std::uint64_t u = t + 1; u < 16; ++u) CHECK(mix(42, t) != mix(42, u));
}

TEST_CASE("derive is order-sensitive") {
    CHECK(derive(7, {1, 2}) != derive(7, {2, 1}));
    CHECK(derive(7, {1, 2}) == derive(7, {1, 2}));
    CHECK(derive(7, {1}) != derive(8, {1}));
}

TEST_CASE("uniform01 stays in the half-open unit interval") {
    RandomStream rs(99);
    for (int i = 0; i < 10000; ++i) {
        const double u = rs.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("normal draws have approximately standard moments") {
    RandomStream rs(2024);
    const int n = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rs.normal();
        sum += x;
        sumsq += x * x;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("normal_vector matches elementwise normal draws in length and law") {
    RandomStream rs(5);
    const Eigen::VectorXd v = rs.normal_vector(1000);
    REQUIRE(v.size() == 1000);
    CHECK(std::abs(v.mean()) < 0.15);
}

TEST_CASE("gamma and poisson draws have the requested means") {
    RandomStream rs(77);
    const int n = 50000;
    double gsum = 0.0;
    long long psum = 0;
    for (int i = 0; i < n; ++i) {
        gsum += rs.gamma(2.5, 2.0);  // mean shape*scale = 5
        psum += rs.poisson(3.0);
    }
    CHECK(gsum / n == doctest::Approx(5.0).epsilon(0.03));
    CHECK(static_cast<double>(psum) / n == doctest::Approx(3.0).epsilon(0.03));
    CHECK_THROWS_AS((void)rs.gamma(-1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS((void)rs.poisson(-0.5), std::invalid_argument);
}
