#include "qss/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace qss {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30U)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27U)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31U);
}

std::uint64_t RngStreams::seed_for(std::string_view name) const noexcept {
    // FNV-1a over the stream name, then mixed with the master seed.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(splitmix64(master_) ^ h);
}

// The std:: distributions are implementation-defined; these are not, so a
// seed reproduces the same session on any standard library.
double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11U) * 0x1.0p-53;
}

bool bernoulli(Rng& rng, double p) {
    if (p >= 1.0) return true;
    if (p <= 0.0) return false;
    return uniform01(rng) < p;
}

std::uint64_t poisson(Rng& rng, double mean) {
    if (!(mean >= 0.0) || mean > 500.0) {
        throw std::invalid_argument("poisson: mean must lie in [0, 500]");
    }
    if (mean == 0.0) return 0;
    const double u = uniform01(rng);
    double p = std::exp(-mean);
    double cdf = p;
    std::uint64_t k = 0;
    while (u >= cdf) {
        ++k;
        p *= mean / static_cast<double>(k);
        cdf += p;
        if (p == 0.0 && cdf < u) break;  // tail lost to rounding
    }
    return k;
}

std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: empty range");
    // Rejection sampling keeps the result exactly uniform.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = rng();
    while (x >= limit) x = rng();
    return x % n;
}

}  // namespace qss
