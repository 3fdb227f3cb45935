#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "limellm/backends.hpp"
#include "limellm/domain.hpp"
#include "limellm/generation.hpp"
#include "limellm/kernel.hpp"
#include "limellm/sampling.hpp"

namespace limellm {

// Assembled least-squares problem: binary rows Z, targets y = f(x_i)[pred],
// and nonnegative sample weights.
class DesignMatrix {
public:
    static DesignMatrix make(std::vector<std::vector<std::uint8_t>> rows,
                             std::vector<double> targets, std::vector<double> weights);

    std::size_t row_count() const noexcept { return rows_.size(); }
    std::size_t feature_count() const noexcept { return rows_.empty() ? 0 : rows_[0].size(); }
    const std::vector<std::vector<std::uint8_t>>& rows() const noexcept { return rows_; }
    const std::vector<double>& targets() const noexcept { return targets_; }
    const std::vector<double>& weights() const noexcept { return weights_; }

private:
    DesignMatrix() = default;

    std::vector<std::vector<std::uint8_t>> rows_;
    std::vector<double> targets_;
    std::vector<double> weights_;
};

// One row per sample plus an appended all-ones row for the original instance
// (target = p(pred|x), weight 1). Sample weights come from the proximity
// kernel; embeddings for the whole neighborhood are fetched in one batched
// call. embedder may be null for BowOnly.
DesignMatrix build_design(const Neighborhood& neighborhood, KernelMode mode,
                          EmbeddingBackend* embedder, double bow_weight = 0.5);

// Deletion-baseline weighting: exponential_kernel(1 - bow_cosine, sigma).
// Used by the standard-LIME path, which permits duplicate masks, so it takes
// raw rows rather than a Neighborhood.
DesignMatrix build_design_deletion(const Instance& instance,
                                   const std::vector<BinaryMask>& masks,
                                   const std::vector<std::string>& texts,
                                   const std::vector<std::vector<double>>& probs,
                                   double sigma);

// Minimizes sum_i pi_i (y_i - w.z_i - b)^2 + lambda*||w||^2 with the
// intercept unregularized, via the weighted normal equations on the
// intercept-augmented matrix. weighted_sse is reported at the optimum.
SurrogateFit fit_weighted_ridge(const DesignMatrix& design, double lambda);

struct PipelineConfig {
    SamplingConfig sampling;
    GenerationPolicy generation;
    PromptSpec prompt;
    KernelMode kernel_mode = KernelMode::Hybrid;
    double lambda = 0.01;
    double hybrid_bow_weight = 0.5;
    std::string method = "lime-llm";
};

// End-to-end: occlusion saliency -> hypotheses -> neighborhood -> design ->
// ridge fit. Scores are the fitted weights. Stage failures are annotated.
Explanation explain(const Instance& instance, ClassifierBackend& classifier, LlmBackend& llm,
                    EmbeddingBackend* embedder, const PipelineConfig& config,
                    GenerationStats* stats_out = nullptr);

// The generation-independent tail of explain(), exposed so one neighborhood
// can be refit under several kernel modes.
Explanation explain_from_neighborhood(const Neighborhood& neighborhood, KernelMode mode,
                                      EmbeddingBackend* embedder, double lambda,
                                      double bow_weight, const std::string& method,
                                      std::int64_t seed);

} // namespace limellm
