#pragma once

// Quick numerical self-checks exposed through `sslc2st check`.

#include <cstdint>
#include <string>
#include <vector>

namespace sslc2st {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Central-difference gradient check over random small networks.
CheckResult check_gradients(std::uint64_t seed, int networks = 10);

/// Poisson-binomial DP: normalization and agreement with the binomial pmf.
CheckResult check_poisson_binomial();

/// Permutation p-values under an exchangeable null: rejection rate and
/// KS distance from uniform.
CheckResult check_permutation_uniformity(std::uint64_t seed, int trials = 500, std::size_t n_perm = 99);

/// Closed-form power at the epsilon -> 1/2 limit and the type-I identity.
CheckResult check_power_formula();

std::vector<CheckResult> run_all_checks(std::uint64_t seed);

} // namespace sslc2st
