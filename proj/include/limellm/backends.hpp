#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "limellm/errors.hpp"

namespace limellm {

// f: black-box text classifier. One call may carry many texts.
class ClassifierBackend {
public:
    virtual ~ClassifierBackend() = default;
    // Returns one probability vector (length C, summing to 1) per input text.
    virtual std::vector<std::vector<double>> predict(const std::vector<std::string>& texts) = 0;
};

// Generative infiller behind a plain completion contract.
class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual std::string complete(const std::string& prompt, double temperature,
                                 std::optional<std::int64_t> seed_hint = std::nullopt) = 0;
};

// Sentence-embedding service; fixed dimension per backend.
class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
};

// ---------------------------------------------------------------------------
// Deterministic mocks

enum class OodMode {
    Off,
    // Returns the uniform distribution whenever a text's token count differs
    // from the reference count registered for the current instance.
    TokenCountPenalty,
};

// Linear bag-of-words classifier: logits = sum of per-token lexicon weights,
// then softmax. Tokens absent from the lexicon contribute nothing.
class MockClassifier : public ClassifierBackend {
public:
    MockClassifier(std::map<std::string, std::vector<double>> lexicon,
                   OodMode ood_mode = OodMode::Off);

    std::vector<std::vector<double>> predict(const std::vector<std::string>& texts) override;

    // Reference length for TokenCountPenalty. Register before explaining each
    // instance; not safe to change while predictions are in flight.
    void set_reference_token_count(std::optional<std::size_t> count) { reference_count_ = count; }

    std::size_t class_count() const noexcept { return class_count_; }

private:
    std::map<std::string, std::vector<double>> lexicon_;
    OodMode ood_mode_;
    std::size_t class_count_;
    std::optional<std::size_t> reference_count_;
};

// Fills the numbered templates found in a batched infill prompt: each
// [SLOT_k] takes the next word from the neutral lexicon (neutral directives)
// or the target label's boundary lexicon (boundary directives), cycling
// deterministically within one call. Anchors survive by construction.
class MockLlm : public LlmBackend {
public:
    MockLlm(std::vector<std::string> neutral_lexicon,
            std::map<std::string, std::vector<std::string>> boundary_lexicon_by_label);

    std::string complete(const std::string& prompt, double temperature,
                         std::optional<std::int64_t> seed_hint = std::nullopt) override;

    // Fault injection: any hypothesis whose template line matches one of
    // these strings exactly gets an anchor-violating reply.
    void set_violate_templates(std::set<std::string> templates) {
        violate_templates_ = std::move(templates);
    }

private:
    std::vector<std::string> neutral_lexicon_;
    std::map<std::string, std::vector<std::string>> boundary_lexicon_;
    std::set<std::string> violate_templates_;
};

// Hashed bag-of-words embedder: 256 dimensions, token surface hashed to an
// index, counts accumulated, L2-normalized. Identical texts map to identical
// vectors; token-disjoint texts are orthogonal barring hash collisions.
class MockEmbedder : public EmbeddingBackend {
public:
    static constexpr std::size_t kDim = 256;

    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

    static std::size_t bucket_of(const std::string& surface);
};

// ---------------------------------------------------------------------------
// Response cache

struct CacheKey {
    std::string backend_id;
    std::string digest_hex;  // 256-bit digest of the canonicalized request
};

// Digest is taken over {"backend": id, "request": request} after nlohmann
// canonicalization (sorted keys, minimal whitespace).
CacheKey make_cache_key(const std::string& backend_id, const nlohmann::json& request);

// Content-addressed file cache: one file per key under a two-level hex
// fan-out. Writes are atomic (temp file + rename). I/O failures fall through
// to the live call and bump a warning counter.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir);

    std::string get_or_call(const CacheKey& key, const std::function<std::string()>& call);

    std::size_t io_warnings() const noexcept { return io_warnings_.load(); }
    const std::filesystem::path& dir() const noexcept { return dir_; }

private:
    std::filesystem::path entry_path(const CacheKey& key) const;

    std::filesystem::path dir_;
    std::atomic<std::size_t> io_warnings_{0};
};

// Cache decorators. For deterministic backends the cached and uncached
// results are identical; with a warm cache the inner backend is never hit.
class CachedClassifier : public ClassifierBackend {
public:
    CachedClassifier(ClassifierBackend& inner, ResponseCache& cache, std::string backend_id);
    std::vector<std::vector<double>> predict(const std::vector<std::string>& texts) override;

private:
    ClassifierBackend& inner_;
    ResponseCache& cache_;
    std::string backend_id_;
};

class CachedLlm : public LlmBackend {
public:
    // context_tag joins the cache key so prompt-template revisions never
    // replay stale generations (pass the template version).
    CachedLlm(LlmBackend& inner, ResponseCache& cache, std::string backend_id,
              std::string context_tag);
    std::string complete(const std::string& prompt, double temperature,
                         std::optional<std::int64_t> seed_hint = std::nullopt) override;

private:
    LlmBackend& inner_;
    ResponseCache& cache_;
    std::string backend_id_;
    std::string context_tag_;
};

class CachedEmbedder : public EmbeddingBackend {
public:
    CachedEmbedder(EmbeddingBackend& inner, ResponseCache& cache, std::string backend_id);
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

private:
    EmbeddingBackend& inner_;
    ResponseCache& cache_;
    std::string backend_id_;
};

// ---------------------------------------------------------------------------
// HTTP backends

struct HttpRetryPolicy {
    int max_attempts = 3;
    int backoff_base_ms = 500;
    int backoff_factor = 2;
};

// POST {base}/predict with {"texts":[...]}; expects {"probs":[[...],...]}.
class HttpClassifier : public ClassifierBackend {
public:
    explicit HttpClassifier(std::string base_url, std::size_t batch_size = 32,
                            int timeout_s = 30, HttpRetryPolicy retry = {});
    std::vector<std::vector<double>> predict(const std::vector<std::string>& texts) override;

private:
    std::string base_url_;
    std::size_t batch_size_;
    int timeout_s_;
    HttpRetryPolicy retry_;
};

// POST {base}/embed with {"texts":[...]}; expects {"embeddings":[[...],...]}.
class HttpEmbedder : public EmbeddingBackend {
public:
    explicit HttpEmbedder(std::string base_url, std::size_t batch_size = 32,
                          int timeout_s = 30, HttpRetryPolicy retry = {});
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

private:
    std::string base_url_;
    std::size_t batch_size_;
    int timeout_s_;
    HttpRetryPolicy retry_;
};

// Provider-agnostic chat/completion adapter. The adapter config names the
// endpoint, the auth env var, and the JSON paths where the prompt goes in and
// the completion text comes out, so swapping providers is a config change.
struct LlmAdapterConfig {
    std::string endpoint;                  // full URL
    std::string auth_env;                  // env var holding the API key
    std::string auth_header = "Authorization";
    std::string auth_prefix = "Bearer ";
    nlohmann::json request_template = nlohmann::json::object();
    std::string prompt_path;               // dot path, e.g. "messages.0.content"
    std::string temperature_path;          // empty = do not send
    std::string seed_path;                 // empty = do not send
    std::string response_text_path;        // e.g. "choices.0.message.content"
    int timeout_s = 120;
    HttpRetryPolicy retry = {};

    static LlmAdapterConfig from_json(const nlohmann::json& j);
};

class HttpLlm : public LlmBackend {
public:
    explicit HttpLlm(LlmAdapterConfig config);
    std::string complete(const std::string& prompt, double temperature,
                         std::optional<std::int64_t> seed_hint = std::nullopt) override;

private:
    LlmAdapterConfig config_;
    std::string api_key_;
};

// Dot-path helpers shared by the adapter ("a.b.0.c"; numeric segments index
// arrays, extending them with nulls as needed on writes).
nlohmann::json json_path_get(const nlohmann::json& doc, const std::string& path);
void json_path_set(nlohmann::json& doc, const std::string& path, nlohmann::json value);

// Env var names honored by the CLI and backend factories.
inline constexpr const char* kEnvLlmApiKey = "LIMELLE_LLM_API_KEY";
inline constexpr const char* kEnvClassifierUrl = "LIMELLE_CLASSIFIER_URL";
inline constexpr const char* kEnvEmbedderUrl = "LIMELLE_EMBEDDER_URL";
inline constexpr const char* kEnvCacheDir = "LIMELLE_CACHE_DIR";

} // namespace limellm
