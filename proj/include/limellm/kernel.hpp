#pragma once

#include <map>
#include <string>
#include <vector>

#include "limellm/backends.hpp"
#include "limellm/domain.hpp"

namespace limellm {

enum class KernelMode { BowOnly, EmbeddingOnly, Hybrid };

const char* kernel_mode_name(KernelMode mode);
KernelMode kernel_mode_from_string(const std::string& name);

// Sparse token-surface counts.
using BowVector = std::map<std::string, std::size_t>;

BowVector bow_vector(const std::vector<Token>& tokens);

// Cosine of the two count vectors over the union vocabulary. In [0,1].
double bow_cosine(const std::vector<Token>& a, const std::vector<Token>& b);

// Cosine of two dense vectors; throws ZeroVectorError on a zero-norm input.
double dense_cosine(const std::vector<double>& a, const std::vector<double>& b);

// Cosine of the two texts' sentence embeddings. In [-1,1].
double embedding_cosine(const std::string& a_text, const std::string& b_text,
                        EmbeddingBackend& embedder);

// Blends precomputed components per mode. Negative embedding cosines clamp to
// 0 first so downstream least-squares weights stay nonnegative. bow_weight is
// the hybrid blend fraction on the lexical side (0.5 = arithmetic mean).
double blend_proximity(double bow, double emb, KernelMode mode, double bow_weight = 0.5);

// Full proximity between two texts. embedder may be null for BowOnly.
double hybrid_proximity(const std::vector<Token>& a_tokens, const std::vector<Token>& b_tokens,
                        const std::string& a_text, const std::string& b_text, KernelMode mode,
                        EmbeddingBackend* embedder, double bow_weight = 0.5);

inline constexpr double kDefaultKernelSigma = 0.75;

// exp(-dist^2 / sigma^2); the deletion-baseline sample weighting.
double exponential_kernel(double cosine_distance, double sigma);

} // namespace limellm
