#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Dense>

namespace flowbank::rng {

/// Mixes a value into a running 64-bit key (splitmix64 finalizer). Used to
/// address independent streams as (base, i, j, ...) without coordination.
std::uint64_t mix(std::uint64_t key, std::uint64_t value);

/// Folds an index path into a base seed, one mix() per element.
std::uint64_t derive(std::uint64_t base, std::initializer_list<std::uint64_t> path);

/// Seeded random stream wrapping std::mt19937_64. One instance per logical
/// unit of work; instances are never shared across threads. Identical seeds
/// and call sequences reproduce identical draws on a given build.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed);

    std::uint64_t next_u64();

    /// Uniform on [0, 1).
    double uniform01();

    /// Standard normal.
    double normal();

    /// Gamma(shape, scale), shape > 0, scale > 0.
    double gamma(double shape, double scale);

    /// Poisson with the given mean >= 0.
    long long poisson(double mean);

    /// n independent standard normals.
    Eigen::VectorXd normal_vector(Eigen::Index n);

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace flowbank::rng
