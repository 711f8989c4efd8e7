#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace qss {

using Rng = std::mt19937_64;

/// Derives independent, named generator streams from one master seed.
///
/// Every consumer of randomness (the source, each party's basis choice, the
/// eavesdropper, the dealer's sampling) asks for its own stream by name, so
/// its draws do not depend on how many numbers any other consumer took.
class RngStreams {
public:
    explicit RngStreams(std::uint64_t master_seed) noexcept : master_(master_seed) {}

    std::uint64_t master_seed() const noexcept { return master_; }

    /// Seed for the stream called `name`.
    std::uint64_t seed_for(std::string_view name) const noexcept;

    Rng stream(std::string_view name) const { return Rng{seed_for(name)}; }

private:
    std::uint64_t master_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Uniform double in [0, 1) from the top 53 bits of one draw.
double uniform01(Rng& rng);

/// True with probability p.
bool bernoulli(Rng& rng, double p);

/// Poisson variate by sequential inversion; intended for small means.
std::uint64_t poisson(Rng& rng, double mean);

/// Uniform integer in [0, n).
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

}  // namespace qss
