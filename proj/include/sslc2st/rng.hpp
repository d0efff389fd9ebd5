#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace sslc2st {

/// Derives an independent substream seed from (base, stream). Pure function;
/// used for every seed fan-out in the project (trials, phases, permutations).
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) noexcept;

/// Seeded generator with platform-independent draws. The standard library
/// distributions are implementation-defined, so uniform, normal and shuffle
/// are implemented here directly on top of mt19937_64.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;

    /// Uniform integer on [0, bound). bound must be positive.
    std::uint64_t uniform_index(std::uint64_t bound) noexcept;

    /// Standard normal via Box-Muller; the second variate of each pair is cached.
    double normal() noexcept;

    template <typename T>
    void shuffle(std::span<T> items) noexcept {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_index(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    /// Uniformly random permutation of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n);

private:
    std::mt19937_64 engine_;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

} // namespace sslc2st
