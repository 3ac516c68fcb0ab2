#include "flowbank/rng.hpp"

#include <stdexcept>

namespace flowbank::rng {

std::uint64_t mix(std::uint64_t key, std::uint64_t value) {
    std::uint64_t z = key + 0x9e3779b97f4a7c15ULL + value;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t derive(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
    std::uint64_t key = base;
    for (std::uint64_t v : path) key = mix(key, v);
    return key;
}

RandomStream::RandomStream(std::uint64_t seed) : engine_(seed) {}

std::uint64_t RandomStream::next_u64() { return engine_(); }

double RandomStream::uniform01() {
    // 53-bit mantissa; strictly below 1.
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RandomStream::normal() { return normal_(engine_); }

double RandomStream::gamma(double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0))
        throw std::invalid_argument("gamma: shape and scale must be positive");
    std::gamma_distribution<double> dist(shape, scale);
    return dist(engine_);
}

long long RandomStream::poisson(double mean) {
    if (!(mean >= 0.0)) throw std::invalid_argument("poisson: mean must be >= 0");
    if (mean == 0.0) return 0;
    std::poisson_distribution<long long> dist(mean);
    return dist(engine_);
}

Eigen::VectorXd RandomStream::normal_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal_(engine_);
    return v;
}

}  // namespace flowbank::rng
