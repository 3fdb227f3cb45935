#include "limellm/backends.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "limellm/detail/sha256.hpp"

namespace limellm {
namespace {

std::vector<std::string> whitespace_split(const std::string& text) {
    std::vector<std::string> words;
    std::string current;
    for (char c : text) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') {
            if (!current.empty()) {
                words.push_back(std::move(current));
                current.clear();
            }
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    return words;
}

std::vector<double> softmax(std::vector<double> logits) {
    const double top = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& v : logits) {
        v = std::exp(v - top);
        sum += v;
    }
    for (double& v : logits) v /= sum;
    return logits;
}

// Extracts the quoted string following `key` in a directive line.
std::string quoted_after(const std::string& line, const std::string& key) {
    const std::size_t at = line.find(key);
    if (at == std::string::npos) return {};
    const std::size_t open = at + key.size();
    const std::size_t close = line.find('"', open);
    if (close == std::string::npos) return {};
    return line.substr(open, close - open);
}

} // namespace

// ---------------------------------------------------------------------------
// MockClassifier

MockClassifier::MockClassifier(std::map<std::string, std::vector<double>> lexicon, OodMode ood_mode)
    : lexicon_(std::move(lexicon)), ood_mode_(ood_mode) {
    if (lexicon_.empty()) {
        throw ConfigError("MockClassifier: lexicon must be non-empty");
    }
    class_count_ = lexicon_.begin()->second.size();
    if (class_count_ < 2) throw ConfigError("MockClassifier: need >= 2 classes");
    for (const auto& [token, weights] : lexicon_) {
        if (weights.size() != class_count_) {
            throw ConfigError("MockClassifier: inconsistent class count for token '" + token + "'");
        }
    }
}

std::vector<std::vector<double>> MockClassifier::predict(const std::vector<std::string>& texts) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    const std::vector<double> uniform(class_count_, 1.0 / static_cast<double>(class_count_));
    for (const std::string& text : texts) {
        const auto words = whitespace_split(text);
        if (ood_mode_ == OodMode::TokenCountPenalty && reference_count_.has_value() &&
            words.size() != *reference_count_) {
            out.push_back(uniform);
            continue;
        }
        std::vector<double> logits(class_count_, 0.0);
        for (const std::string& word : words) {
            const auto it = lexicon_.find(word);
            if (it == lexicon_.end()) continue;
            for (std::size_t c = 0; c < class_count_; ++c) logits[c] += it->second[c];
        }
        out.push_back(softmax(std::move(logits)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// MockLlm

MockLlm::MockLlm(std::vector<std::string> neutral_lexicon,
                 std::map<std::string, std::vector<std::string>> boundary_lexicon_by_label)
    : neutral_lexicon_(std::move(neutral_lexicon)),
      boundary_lexicon_(std::move(boundary_lexicon_by_label)) {
    if (neutral_lexicon_.empty()) {
        throw ConfigError("MockLlm: neutral lexicon must be non-empty");
    }
    for (const auto& [label, words] : boundary_lexicon_) {
        if (words.empty()) {
            throw ConfigError("MockLlm: empty boundary lexicon for label '" + label + "'");
        }
    }
}

std::string MockLlm::complete(const std::string& prompt, double /*temperature*/,
                              std::optional<std::int64_t> /*seed_hint*/) {
    struct Block {
        std::size_t index = 0;
        bool boundary = false;
        std::string label;
        std::string template_line;
    };
    std::vector<Block> blocks;

    std::istringstream lines(prompt);
    std::string line;
    std::optional<Block> open_block;
    while (std::getline(lines, line)) {
        if (line.rfind("Hypothesis ", 0) == 0) {
            Block b;
            std::size_t i = 11;
            const std::size_t digits_begin = i;
            while (i < line.size() && line[i] >= '0' && line[i] <= '9') ++i;
            if (i == digits_begin) continue;
            b.index = static_cast<std::size_t>(std::stoull(line.substr(digits_begin, i - digits_begin)));
            if (line.find("change the label to \"") != std::string::npos) {
                b.boundary = true;
                b.label = quoted_after(line, "change the label to \"");
            } else {
                b.label = quoted_after(line, "keep the label \"");
            }
            open_block = b;
        } else if (open_block.has_value() && line.rfind("Template: ", 0) == 0) {
            open_block->template_line = line.substr(10);
            blocks.push_back(*open_block);
            open_block.reset();
        }
    }
    if (blocks.empty()) {
        throw MalformedPromptError("MockLlm: no hypothesis blocks found in prompt");
    }

    std::size_t neutral_cursor = 0;
    std::map<std::string, std::size_t> boundary_cursor;
    std::string out;
    for (const Block& b : blocks) {
        std::string sentence;
        if (violate_templates_.count(b.template_line) != 0) {
            sentence = "??? ??? ???";
        } else {
            sentence = b.template_line;
            std::size_t at;
            while ((at = sentence.find("[SLOT_")) != std::string::npos) {
                const std::size_t close = sentence.find(']', at);
                if (close == std::string::npos) {
                    throw MalformedPromptError("MockLlm: unterminated slot placeholder");
                }
                std::string word;
                if (b.boundary) {
                    const auto it = boundary_lexicon_.find(b.label);
                    if (it == boundary_lexicon_.end()) {
                        throw MalformedPromptError("MockLlm: no boundary lexicon for label '" +
                                                   b.label + "'");
                    }
                    word = it->second[boundary_cursor[b.label]++ % it->second.size()];
                } else {
                    word = neutral_lexicon_[neutral_cursor++ % neutral_lexicon_.size()];
                }
                sentence.replace(at, close - at + 1, word);
            }
        }
        out += std::to_string(b.index) + ": " + sentence + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// MockEmbedder

std::size_t MockEmbedder::bucket_of(const std::string& surface) {
    // FNV-1a, folded to the embedding dimension.
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : surface) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 1099511628211ULL;
    }
    return static_cast<std::size_t>(h % kDim);
}

std::vector<std::vector<double>> MockEmbedder::embed(const std::vector<std::string>& texts) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const std::string& text : texts) {
        std::vector<double> vec(kDim, 0.0);
        for (const std::string& word : whitespace_split(text)) {
            vec[bucket_of(word)] += 1.0;
        }
        double norm = 0.0;
        for (double v : vec) norm += v * v;
        if (norm > 0.0) {
            norm = std::sqrt(norm);
            for (double& v : vec) v /= norm;
        }
        out.push_back(std::move(vec));
    }
    return out;
}

// ---------------------------------------------------------------------------
// ResponseCache

CacheKey make_cache_key(const std::string& backend_id, const nlohmann::json& request) {
    nlohmann::json canonical;
    canonical["backend"] = backend_id;
    canonical["request"] = request;
    return CacheKey{backend_id, detail::sha256_hex(canonical.dump())};
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path ResponseCache::entry_path(const CacheKey& key) const {
    return dir_ / key.digest_hex.substr(0, 2) / key.digest_hex.substr(2, 2) / key.digest_hex;
}

std::string ResponseCache::get_or_call(const CacheKey& key,
                                       const std::function<std::string()>& call) {
    const std::filesystem::path path = entry_path(key);
    try {
        if (std::filesystem::exists(path)) {
            std::ifstream in(path, std::ios::binary);
            if (in) {
                std::ostringstream buffer;
                buffer << in.rdbuf();
                return buffer.str();
            }
            ++io_warnings_;
        }
    } catch (const std::exception&) {
        ++io_warnings_;
    }

    const std::string response = call();

    try {
        std::filesystem::create_directories(path.parent_path());
        static std::atomic<std::uint64_t> temp_counter{0};
        const std::filesystem::path temp = path.string() + ".tmp" +
                                           std::to_string(::getpid()) + "." +
                                           std::to_string(temp_counter.fetch_add(1));
        {
            std::ofstream out(temp, std::ios::binary | std::ios::trunc);
            if (!out) throw CacheIoError("cannot open temp file");
            out.write(response.data(), static_cast<std::streamsize>(response.size()));
            if (!out) throw CacheIoError("short write");
        }
        std::filesystem::rename(temp, path);
    } catch (const std::exception&) {
        ++io_warnings_;
    }
    return response;
}

// ---------------------------------------------------------------------------
// Cache decorators

CachedClassifier::CachedClassifier(ClassifierBackend& inner, ResponseCache& cache,
                                   std::string backend_id)
    : inner_(inner), cache_(cache), backend_id_(std::move(backend_id)) {}

std::vector<std::vector<double>> CachedClassifier::predict(const std::vector<std::string>& texts) {
    if (texts.empty()) return {};
    nlohmann::json request;
    request["texts"] = texts;
    const CacheKey key = make_cache_key(backend_id_, request);
    const std::string stored = cache_.get_or_call(key, [&] {
        nlohmann::json response;
        response["probs"] = inner_.predict(texts);
        return response.dump();
    });
    try {
        return nlohmann::json::parse(stored).at("probs").get<std::vector<std::vector<double>>>();
    } catch (const nlohmann::json::exception& e) {
        throw BackendError("CachedClassifier: corrupt cache entry: " + std::string(e.what()));
    }
}

CachedLlm::CachedLlm(LlmBackend& inner, ResponseCache& cache, std::string backend_id,
                     std::string context_tag)
    : inner_(inner), cache_(cache), backend_id_(std::move(backend_id)),
      context_tag_(std::move(context_tag)) {}

std::string CachedLlm::complete(const std::string& prompt, double temperature,
                                std::optional<std::int64_t> seed_hint) {
    nlohmann::json request;
    request["prompt"] = prompt;
    request["temperature"] = temperature;
    request["context"] = context_tag_;
    if (seed_hint.has_value()) request["seed_hint"] = *seed_hint;
    const CacheKey key = make_cache_key(backend_id_, request);
    return cache_.get_or_call(key, [&] { return inner_.complete(prompt, temperature, seed_hint); });
}

CachedEmbedder::CachedEmbedder(EmbeddingBackend& inner, ResponseCache& cache,
                               std::string backend_id)
    : inner_(inner), cache_(cache), backend_id_(std::move(backend_id)) {}

std::vector<std::vector<double>> CachedEmbedder::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) return {};
    nlohmann::json request;
    request["texts"] = texts;
    const CacheKey key = make_cache_key(backend_id_, request);
    const std::string stored = cache_.get_or_call(key, [&] {
        nlohmann::json response;
        response["embeddings"] = inner_.embed(texts);
        return response.dump();
    });
    try {
        return nlohmann::json::parse(stored)
            .at("embeddings")
            .get<std::vector<std::vector<double>>>();
    } catch (const nlohmann::json::exception& e) {
        throw BackendError("CachedEmbedder: corrupt cache entry: " + std::string(e.what()));
    }
}

} // namespace limellm
