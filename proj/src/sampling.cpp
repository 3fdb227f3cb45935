#include "limellm/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "limellm/tokenization.hpp"

namespace limellm {
namespace {

// Hand-rolled draws so the stream is reproducible across standard libraries
// (std distributions are implementation-defined).
double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = rng();
    while (v >= limit) v = rng();
    return static_cast<std::size_t>(v % n);
}

std::size_t max_masked_count(std::size_t d, double max_masked_fraction) {
    const auto cap = static_cast<std::size_t>(std::floor(static_cast<double>(d) * max_masked_fraction));
    return std::max<std::size_t>(1, cap);
}

// Number of distinct masks with 1..k_max masked positions, saturating.
double admissible_mask_count(std::size_t d, std::size_t k_max) {
    double total = 0.0;
    double binom = 1.0;  // C(d, 0)
    for (std::size_t k = 1; k <= k_max; ++k) {
        binom *= static_cast<double>(d - k + 1) / static_cast<double>(k);
        total += binom;
        if (total > 1e18) return 1e18;
    }
    return total;
}

// Softmax over scores/temperature; uniform bias when scores are absent.
std::vector<double> mask_position_weights(std::size_t d, const SaliencyProfile* bias,
                                          double temperature) {
    std::vector<double> weights(d, 1.0);
    if (bias == nullptr) return weights;
    if (bias->size() != d) {
        throw LengthMismatchError("sample_masks: bias length " + std::to_string(bias->size()) +
                                  " != d = " + std::to_string(d));
    }
    const auto& scores = bias->scores();
    const double top = *std::max_element(scores.begin(), scores.end());
    for (std::size_t j = 0; j < d; ++j) {
        weights[j] = std::exp((scores[j] - top) / temperature);
    }
    return weights;
}

// k distinct positions drawn without replacement, proportionally to weights.
std::vector<std::size_t> draw_positions(std::mt19937_64& rng, std::size_t k,
                                        const std::vector<double>& weights) {
    std::vector<std::size_t> pool(weights.size());
    for (std::size_t j = 0; j < pool.size(); ++j) pool[j] = j;
    std::vector<double> w = weights;

    std::vector<std::size_t> chosen;
    chosen.reserve(k);
    for (std::size_t draw = 0; draw < k; ++draw) {
        double total = 0.0;
        for (std::size_t j = 0; j < pool.size(); ++j) total += w[j];
        const double target = uniform01(rng) * total;
        double acc = 0.0;
        std::size_t pick = pool.size() - 1;
        for (std::size_t j = 0; j < pool.size(); ++j) {
            acc += w[j];
            if (target < acc) {
                pick = j;
                break;
            }
        }
        chosen.push_back(pool[pick]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
        w.erase(w.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    return chosen;
}

BinaryMask mask_from_positions(std::size_t d, const std::vector<std::size_t>& masked) {
    std::vector<std::uint8_t> bits(d, 1);
    for (std::size_t j : masked) bits[j] = 0;
    return BinaryMask(std::move(bits));
}

// Draws one fresh mask, optionally forcing a position into the masked set.
// Consumes attempts_left; returns nullopt when the budget runs out.
std::optional<BinaryMask> draw_distinct_mask(std::mt19937_64& rng, std::size_t d, std::size_t k_max,
                                             const std::vector<double>& weights,
                                             std::set<std::vector<std::uint8_t>>& used,
                                             std::size_t& attempts_left,
                                             std::optional<std::size_t> forced = std::nullopt) {
    while (attempts_left > 0) {
        --attempts_left;
        const std::size_t k = 1 + uniform_index(rng, k_max);
        std::vector<std::size_t> positions;
        if (forced.has_value()) {
            std::vector<double> w = weights;
            w[*forced] = 0.0;
            positions = draw_positions(rng, k - 1, w);
            positions.push_back(*forced);
        } else {
            positions = draw_positions(rng, k, weights);
        }
        BinaryMask mask = mask_from_positions(d, positions);
        if (used.insert(mask.bits()).second) {
            return mask;
        }
    }
    return std::nullopt;
}

std::vector<BinaryMask> sample_masks_into(std::mt19937_64& rng, std::size_t d, std::size_t count,
                                          std::size_t k_max, const std::vector<double>& weights,
                                          std::set<std::vector<std::uint8_t>>& used) {
    std::vector<BinaryMask> masks;
    masks.reserve(count);
    std::size_t attempts_left = 50 * count;
    while (masks.size() < count) {
        auto mask = draw_distinct_mask(rng, d, k_max, weights, used, attempts_left);
        if (!mask.has_value()) {
            throw ExhaustedMaskSpaceError(
                "sample_masks: could not find " + std::to_string(count) +
                " distinct masks within " + std::to_string(50 * count) + " attempts (d=" +
                std::to_string(d) + ", k_max=" + std::to_string(k_max) + ")");
        }
        masks.push_back(std::move(*mask));
    }
    return masks;
}

std::size_t runner_up_label(const std::vector<double>& probs, std::size_t predicted) {
    std::size_t best = predicted == 0 ? 1 : 0;
    for (std::size_t c = 0; c < probs.size(); ++c) {
        if (c == predicted) continue;
        if (probs[c] > probs[best]) best = c;
    }
    return best;
}

} // namespace

void SamplingConfig::validate() const {
    if (n_samples < 2) throw ConfigError("sampling.n_samples must be >= 2");
    if (boundary_fraction <= 0.0 || boundary_fraction >= 1.0) {
        throw ConfigError("sampling.boundary_fraction must lie in (0,1)");
    }
    if (max_masked_fraction <= 0.0 || max_masked_fraction > 1.0) {
        throw ConfigError("sampling.max_masked_fraction must lie in (0,1]");
    }
    if (!(saliency_temperature > 0.0)) {
        throw ConfigError("sampling.saliency_temperature must be > 0");
    }
}

SaliencyProfile::SaliencyProfile(std::vector<double> scores) : scores_(std::move(scores)) {
    if (scores_.empty()) throw InvariantError("SaliencyProfile: scores must be non-empty");
    for (double s : scores_) {
        if (!std::isfinite(s)) throw InvariantError("SaliencyProfile: scores must be finite");
    }
}

std::size_t SaliencyProfile::top_index() const {
    return static_cast<std::size_t>(
        std::max_element(scores_.begin(), scores_.end()) - scores_.begin());
}

SaliencyProfile occlusion_saliency(const Instance& instance, ClassifierBackend& classifier) {
    const std::size_t d = instance.token_count();
    std::vector<std::string> occluded;
    occluded.reserve(d);
    for (std::size_t j = 0; j < d; ++j) {
        std::vector<std::uint8_t> bits(d, 1);
        bits[j] = 0;
        occluded.push_back(apply_deletion(instance.tokens(), BinaryMask(std::move(bits))));
    }
    const auto probs = classifier.predict(occluded);
    if (probs.size() != d) {
        throw BackendError("occlusion_saliency: classifier returned " +
                           std::to_string(probs.size()) + " vectors for " + std::to_string(d) +
                           " texts");
    }
    const std::size_t label = instance.predicted_label();
    const double base = instance.probs()[label];
    std::vector<double> scores(d);
    for (std::size_t j = 0; j < d; ++j) {
        if (probs[j].size() <= label) {
            throw BackendError("occlusion_saliency: class count mismatch in classifier output");
        }
        scores[j] = base - probs[j][label];
    }
    return SaliencyProfile(std::move(scores));
}

std::vector<BinaryMask> sample_masks(std::size_t d, std::size_t count, std::uint64_t rng_seed,
                                     double max_masked_fraction, const SaliencyProfile* bias,
                                     double temperature) {
    if (count < 1) throw ConfigError("sample_masks: count must be >= 1");
    if (d < 2) throw ConfigError("sample_masks: d must be >= 2");
    const std::size_t k_max = max_masked_count(d, max_masked_fraction);
    if (static_cast<double>(count) > admissible_mask_count(d, k_max)) {
        throw ExhaustedMaskSpaceError("sample_masks: requested " + std::to_string(count) +
                                      " masks but the admissible space is smaller");
    }
    std::mt19937_64 rng(rng_seed);
    const auto weights = mask_position_weights(d, bias, temperature);
    std::set<std::vector<std::uint8_t>> used;
    return sample_masks_into(rng, d, count, k_max, weights, used);
}

std::vector<PerturbationHypothesis> build_hypotheses(const Instance& instance,
                                                     const SamplingConfig& config,
                                                     const SaliencyProfile& saliency) {
    config.validate();
    const std::size_t d = instance.token_count();
    if (d < 2) throw InvariantError("build_hypotheses: instance must have >= 2 tokens");
    if (saliency.size() != d) {
        throw LengthMismatchError("build_hypotheses: saliency length mismatch");
    }

    const auto n = static_cast<std::size_t>(config.n_samples);
    const auto n_neutral = static_cast<std::size_t>(
        std::ceil(static_cast<double>(config.n_samples) * (1.0 - config.boundary_fraction)));
    const std::size_t n_boundary = n - n_neutral;

    const std::size_t k_max = max_masked_count(d, config.max_masked_fraction);
    if (static_cast<double>(n) > admissible_mask_count(d, k_max)) {
        throw ExhaustedMaskSpaceError("build_hypotheses: hypothesis count " + std::to_string(n) +
                                      " exceeds the admissible mask space");
    }

    const std::size_t predicted = instance.predicted_label();
    const std::size_t counterfactual = runner_up_label(instance.probs(), predicted);

    std::mt19937_64 rng(static_cast<std::uint64_t>(config.seed));
    std::set<std::vector<std::uint8_t>> used;

    const std::vector<double> uniform_weights(d, 1.0);
    const auto biased_weights =
        mask_position_weights(d, &saliency, config.saliency_temperature);

    std::vector<PerturbationHypothesis> hypotheses;
    hypotheses.reserve(n);
    for (BinaryMask& mask : sample_masks_into(rng, d, n_neutral, k_max, uniform_weights, used)) {
        hypotheses.push_back(PerturbationHypothesis::make(std::move(mask), Strategy::NeutralInfill,
                                                          predicted, predicted));
    }
    for (BinaryMask& mask : sample_masks_into(rng, d, n_boundary, k_max, biased_weights, used)) {
        hypotheses.push_back(PerturbationHypothesis::make(std::move(mask), Strategy::BoundaryInfill,
                                                          counterfactual, predicted));
    }

    // Coverage: when n >= d every token must be masked somewhere. Replace a
    // mask whose slots are all covered twice with one forcing the missing
    // token; such a victim always exists (n masks cannot all uniquely cover
    // positions drawn from fewer than n candidates).
    if (n >= d) {
        for (std::size_t guard = 0; guard < 2 * d; ++guard) {
            std::vector<std::size_t> coverage(d, 0);
            for (const auto& h : hypotheses) {
                for (std::size_t j = 0; j < d; ++j) {
                    if (h.mask().masked(j)) ++coverage[j];
                }
            }
            std::size_t uncovered = d;
            for (std::size_t j = 0; j < d; ++j) {
                if (coverage[j] == 0) {
                    uncovered = j;
                    break;
                }
            }
            if (uncovered == d) break;

            std::size_t victim = n;
            for (std::size_t i = n; i-- > 0;) {
                bool safe = true;
                for (std::size_t j = 0; j < d; ++j) {
                    if (hypotheses[i].mask().masked(j) && coverage[j] < 2) {
                        safe = false;
                        break;
                    }
                }
                if (safe) {
                    victim = i;
                    break;
                }
            }
            if (victim == n) {
                throw ExhaustedMaskSpaceError("build_hypotheses: coverage repair found no victim");
            }

            const auto& old = hypotheses[victim];
            const auto& weights =
                old.strategy() == Strategy::BoundaryInfill ? biased_weights : uniform_weights;
            std::size_t repair_attempts = 50;
            auto replacement =
                draw_distinct_mask(rng, d, k_max, weights, used, repair_attempts, uncovered);
            if (!replacement.has_value()) {
                // A single-token mask for the uncovered position is always
                // fresh: if it were used, the position would be covered.
                std::vector<std::uint8_t> bits(d, 1);
                bits[uncovered] = 0;
                replacement = BinaryMask(std::move(bits));
                used.insert(replacement->bits());
            }
            hypotheses[victim] = PerturbationHypothesis::make(
                std::move(*replacement), old.strategy(), old.target_label(), predicted);
        }
    }

    return hypotheses;
}

} // namespace limellm
