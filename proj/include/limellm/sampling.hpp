#pragma once

#include <cstdint>
#include <vector>

#include "limellm/backends.hpp"
#include "limellm/domain.hpp"

namespace limellm {

struct SamplingConfig {
    int n_samples = 20;
    double boundary_fraction = 0.5;
    double max_masked_fraction = 0.5;
    double saliency_temperature = 1.0;
    std::int64_t seed = 0;

    void validate() const;  // throws ConfigError
};

// Prior per-token attribution used to bias boundary masks. May be negative.
class SaliencyProfile {
public:
    explicit SaliencyProfile(std::vector<double> scores);  // entries must be finite

    const std::vector<double>& scores() const noexcept { return scores_; }
    std::size_t size() const noexcept { return scores_.size(); }
    // Argmax; ties broken by ascending index.
    std::size_t top_index() const;

private:
    std::vector<double> scores_;
};

// Single-token occlusion: score_j = p(pred | x) - p(pred | x without token j).
// Issues exactly one batched classifier call carrying d texts.
SaliencyProfile occlusion_saliency(const Instance& instance, ClassifierBackend& classifier);

// Draws `count` pairwise-distinct masks over d tokens. Each mask clears k
// positions with k uniform on {1..max(1, floor(d*max_masked_fraction))};
// positions are uniform without replacement, or softmax(bias/temperature)-
// weighted when bias is given. Duplicates are rejected and resampled, up to
// 50*count attempts.
std::vector<BinaryMask> sample_masks(std::size_t d, std::size_t count, std::uint64_t rng_seed,
                                     double max_masked_fraction,
                                     const SaliencyProfile* bias = nullptr,
                                     double temperature = 1.0);

// The full hypothesis set for one instance: ceil(n*(1-boundary_fraction))
// neutral hypotheses with unbiased masks, the rest boundary hypotheses with
// saliency-biased masks targeting the runner-up class. Masks are distinct
// across the whole set, and when n_samples >= d every token index is masked
// in at least one hypothesis.
std::vector<PerturbationHypothesis> build_hypotheses(const Instance& instance,
                                                     const SamplingConfig& config,
                                                     const SaliencyProfile& saliency);

} // namespace limellm
