#include "limellm/baselines.hpp"

#include <random>

#include "limellm/surrogate.hpp"
#include "limellm/tokenization.hpp"

namespace limellm {
namespace {

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = rng();
    while (v >= limit) v = rng();
    return static_cast<std::size_t>(v % n);
}

// One deletion mask: k ~ uniform{1..d-1} cleared positions, uniform without
// replacement. Duplicates across draws are permitted (classic LIME).
BinaryMask draw_deletion_mask(std::mt19937_64& rng, std::size_t d) {
    const std::size_t k = 1 + uniform_index(rng, d - 1);
    std::vector<std::size_t> pool(d);
    for (std::size_t j = 0; j < d; ++j) pool[j] = j;
    std::vector<std::uint8_t> bits(d, 1);
    for (std::size_t draw = 0; draw < k; ++draw) {
        const std::size_t pick = uniform_index(rng, pool.size());
        bits[pool[pick]] = 0;
        pool[pick] = pool.back();
        pool.pop_back();
    }
    return BinaryMask(std::move(bits));
}

std::vector<BinaryMask> enumerate_all_masks(std::size_t d) {
    if (d > 20) throw ConfigError("explain_lime: exhaustive enumeration limited to d <= 20");
    std::vector<BinaryMask> masks;
    const std::uint32_t total = 1u << d;
    masks.reserve(total - 2);
    for (std::uint32_t pattern = 1; pattern + 1 < total; ++pattern) {
        std::vector<std::uint8_t> bits(d, 0);
        for (std::size_t j = 0; j < d; ++j) {
            bits[j] = (pattern >> j) & 1u;
        }
        masks.emplace_back(std::move(bits));
    }
    return masks;
}

} // namespace

void LimeConfig::validate() const {
    if (n_samples < 2) throw ConfigError("baseline.n_samples must be >= 2");
    if (!(sigma > 0.0)) throw ConfigError("baseline.sigma must be > 0");
    if (lambda < 0.0) throw ConfigError("baseline.lambda must be >= 0");
}

Explanation explain_lime(const Instance& instance, ClassifierBackend& classifier,
                         const LimeConfig& config) {
    config.validate();
    const std::size_t d = instance.token_count();
    if (d < 2) throw InvariantError("explain_lime: instance must have >= 2 tokens");

    std::vector<BinaryMask> masks;
    if (config.exhaustive) {
        masks = enumerate_all_masks(d);
    } else {
        std::mt19937_64 rng(static_cast<std::uint64_t>(config.seed));
        masks.reserve(static_cast<std::size_t>(config.n_samples));
        for (int i = 0; i < config.n_samples; ++i) {
            masks.push_back(draw_deletion_mask(rng, d));
        }
    }

    std::vector<std::string> texts;
    texts.reserve(masks.size());
    for (const BinaryMask& mask : masks) {
        texts.push_back(apply_deletion(instance.tokens(), mask));
    }

    const auto probs = classifier.predict(texts);
    if (probs.size() != texts.size()) {
        throw BackendError("explain_lime: classifier returned " + std::to_string(probs.size()) +
                           " vectors for " + std::to_string(texts.size()) + " texts");
    }

    const DesignMatrix design =
        build_design_deletion(instance, masks, texts, probs, config.sigma);
    const SurrogateFit fit = fit_weighted_ridge(design, config.lambda);

    std::vector<std::string> surfaces;
    surfaces.reserve(d);
    for (const Token& t : instance.tokens()) surfaces.push_back(t.surface);

    FitDiagnostics diagnostics{fit.weighted_sse(), fit.sample_count(), 0};
    return Explanation::make(instance.id(), fit.weights(), std::move(surfaces), "lime-standard",
                             config.seed, diagnostics);
}

} // namespace limellm
