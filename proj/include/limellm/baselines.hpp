#pragma once

#include <cstdint>

#include "limellm/backends.hpp"
#include "limellm/domain.hpp"
#include "limellm/kernel.hpp"

namespace limellm {

struct LimeConfig {
    int n_samples = 1000;
    double sigma = kDefaultKernelSigma;
    double lambda = 0.01;
    std::int64_t seed = 0;
    // Replaces sampling with one row per admissible mask (all 2^d - 2 of
    // them); only sensible for small d. Used to cross-check the sampled fit
    // against the exact weighted least-squares solution.
    bool exhaustive = false;

    void validate() const;
};

// Standard LIME: random token-deletion neighborhoods (duplicates permitted),
// exponential BoW-distance weighting, shared ridge fit. Method tag
// "lime-standard".
Explanation explain_lime(const Instance& instance, ClassifierBackend& classifier,
                         const LimeConfig& config);

} // namespace limellm
