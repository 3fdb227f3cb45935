#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "limellm/backends.hpp"
#include "limellm/baselines.hpp"
#include "limellm/evaluation.hpp"
#include "limellm/generation.hpp"
#include "limellm/kernel.hpp"
#include "limellm/sampling.hpp"

namespace limellm {

// The single JSON config document driving a run. Unknown keys are errors.
struct RunConfig {
    std::string method = "lime-llm";  // lime-llm | lime-standard
    SamplingConfig sampling;          // per-run seed comes from `seeds`
    GenerationPolicy generation;
    KernelMode kernel_mode = KernelMode::Hybrid;
    double lambda = 0.01;
    double hybrid_bow_weight = 0.5;
    LimeConfig baseline;
    PromptSpec prompt;
    bool has_prompt = false;
    Pooling pooling = Pooling::Micro;
    ScoreRanking score_ranking = ScoreRanking::Signed;
    std::vector<std::int64_t> seeds = {0};
    int parallel = 4;
    std::string cache_dir;            // empty = no cache (env may still supply one)
    nlohmann::json backends = nlohmann::json::object();

    // Parses and validates; prompt_spec and template paths resolve relative
    // to the config file's directory.
    static RunConfig load(const std::filesystem::path& path);
    static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
};

// Constructed backends plus the cache wrappers. Raw pointers are the ones to
// call; owners keep everything alive.
struct BackendSet {
    std::unique_ptr<ResponseCache> cache;
    std::unique_ptr<ClassifierBackend> classifier_impl;
    std::unique_ptr<LlmBackend> llm_impl;
    std::unique_ptr<EmbeddingBackend> embedder_impl;
    std::unique_ptr<ClassifierBackend> classifier_wrapper;
    std::unique_ptr<LlmBackend> llm_wrapper;
    std::unique_ptr<EmbeddingBackend> embedder_wrapper;

    ClassifierBackend* classifier = nullptr;
    LlmBackend* llm = nullptr;            // null when not configured
    EmbeddingBackend* embedder = nullptr; // null when not configured
    MockClassifier* mock_classifier = nullptr;
    bool ood_sequential = false;          // TokenCountPenalty mock: one instance at a time
};

// cache_dir_override: highest priority; then config.cache_dir; then
// LIMELLE_CACHE_DIR. Missing HTTP URLs fall back to LIMELLE_CLASSIFIER_URL /
// LIMELLE_EMBEDDER_URL.
BackendSet build_backends(const RunConfig& config, const std::string& cache_dir_override = {});

} // namespace limellm
