#include "limellm/kernel.hpp"

#include <algorithm>
#include <cmath>

namespace limellm {

const char* kernel_mode_name(KernelMode mode) {
    switch (mode) {
        case KernelMode::BowOnly: return "bow";
        case KernelMode::EmbeddingOnly: return "embedding";
        case KernelMode::Hybrid: return "hybrid";
    }
    return "hybrid";
}

KernelMode kernel_mode_from_string(const std::string& name) {
    if (name == "bow") return KernelMode::BowOnly;
    if (name == "embedding") return KernelMode::EmbeddingOnly;
    if (name == "hybrid") return KernelMode::Hybrid;
    throw ConfigError("unknown kernel mode '" + name + "' (expected bow|embedding|hybrid)");
}

BowVector bow_vector(const std::vector<Token>& tokens) {
    BowVector counts;
    for (const Token& t : tokens) {
        ++counts[t.surface];
    }
    return counts;
}

double bow_cosine(const std::vector<Token>& a, const std::vector<Token>& b) {
    if (a.empty() || b.empty()) {
        throw EmptyInputError("bow_cosine: both token lists must be non-empty");
    }
    const BowVector ca = bow_vector(a);
    const BowVector cb = bow_vector(b);

    double dot = 0.0;
    double norm_a = 0.0;
    double norm_b = 0.0;
    for (const auto& [surface, count] : ca) {
        norm_a += static_cast<double>(count) * static_cast<double>(count);
        const auto it = cb.find(surface);
        if (it != cb.end()) {
            dot += static_cast<double>(count) * static_cast<double>(it->second);
        }
    }
    for (const auto& [surface, count] : cb) {
        norm_b += static_cast<double>(count) * static_cast<double>(count);
    }
    return dot / (std::sqrt(norm_a) * std::sqrt(norm_b));
}

double dense_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw LengthMismatchError("dense_cosine: dimension mismatch");
    }
    double dot = 0.0;
    double norm_a = 0.0;
    double norm_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        norm_a += a[i] * a[i];
        norm_b += b[i] * b[i];
    }
    if (norm_a == 0.0 || norm_b == 0.0) {
        throw ZeroVectorError("dense_cosine: zero-norm embedding");
    }
    return dot / (std::sqrt(norm_a) * std::sqrt(norm_b));
}

double embedding_cosine(const std::string& a_text, const std::string& b_text,
                        EmbeddingBackend& embedder) {
    const auto vectors = embedder.embed({a_text, b_text});
    if (vectors.size() != 2) {
        throw BackendError("embedding_cosine: embedder returned " +
                           std::to_string(vectors.size()) + " vectors for 2 texts");
    }
    return dense_cosine(vectors[0], vectors[1]);
}

double blend_proximity(double bow, double emb, KernelMode mode, double bow_weight) {
    const double clamped = std::clamp(emb, 0.0, 1.0);
    switch (mode) {
        case KernelMode::BowOnly: return bow;
        case KernelMode::EmbeddingOnly: return clamped;
        case KernelMode::Hybrid: return bow_weight * bow + (1.0 - bow_weight) * clamped;
    }
    return bow;
}

double hybrid_proximity(const std::vector<Token>& a_tokens, const std::vector<Token>& b_tokens,
                        const std::string& a_text, const std::string& b_text, KernelMode mode,
                        EmbeddingBackend* embedder, double bow_weight) {
    double bow = 0.0;
    if (mode != KernelMode::EmbeddingOnly) {
        bow = bow_cosine(a_tokens, b_tokens);
    }
    double emb = 0.0;
    if (mode != KernelMode::BowOnly) {
        if (embedder == nullptr) {
            throw ConfigError("hybrid_proximity: embedding backend required for this kernel mode");
        }
        emb = embedding_cosine(a_text, b_text, *embedder);
    }
    return blend_proximity(bow, emb, mode, bow_weight);
}

double exponential_kernel(double cosine_distance, double sigma) {
    if (sigma <= 0.0) {
        throw ConfigError("exponential_kernel: sigma must be > 0");
    }
    return std::exp(-(cosine_distance * cosine_distance) / (sigma * sigma));
}

} // namespace limellm
