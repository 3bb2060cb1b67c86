#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace divsel {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Stream-independent child seed, e.g. one per replication or per subspace.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;
std::uint64_t derive_seed(std::uint64_t seed, std::span<const std::size_t> key) noexcept;

/// Bernoulli draw with probability p; p <= 0 and p >= 1 never consume
/// randomness so that degenerate rates stay exact.
bool bernoulli(Rng& rng, double p);

std::size_t uniform_index(Rng& rng, std::size_t n);
double uniform01(Rng& rng);

} // namespace divsel
