#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "limellm/backends.hpp"

namespace limellm {
namespace {

struct SplitUrl {
    std::string host;  // scheme://host:port
    std::string path_prefix;
};

SplitUrl split_url(const std::string& url) {
    const std::size_t scheme = url.find("://");
    if (scheme == std::string::npos) {
        throw ConfigError("backend URL '" + url + "' must include a scheme");
    }
    const std::size_t path = url.find('/', scheme + 3);
    if (path == std::string::npos) return {url, ""};
    return {url.substr(0, path), url.substr(path)};
}

std::string excerpt_of(const std::string& body) {
    return body.size() <= 200 ? body : body.substr(0, 200) + "...";
}

// POSTs JSON with exponential backoff on transport errors, 5xx, and 429.
// Non-transient statuses fail immediately.
std::string post_json_with_retries(const std::string& url, const std::string& body,
                                   const httplib::Headers& headers, int timeout_s,
                                   const HttpRetryPolicy& retry) {
    const SplitUrl split = split_url(url);
    int delay_ms = retry.backoff_base_ms;
    int last_status = 0;
    std::string last_detail = "no attempt made";
    std::string last_excerpt;

    for (int attempt = 1; attempt <= retry.max_attempts; ++attempt) {
        httplib::Client client(split.host);
        client.set_connection_timeout(timeout_s, 0);
        client.set_read_timeout(timeout_s, 0);
        client.set_write_timeout(timeout_s, 0);

        auto res = client.Post(split.path_prefix.empty() ? "/" : split.path_prefix, headers, body,
                               "application/json");
        if (res && res->status == 200) {
            return res->body;
        }
        bool transient = true;
        if (!res) {
            last_status = 0;
            last_detail = "transport error (" + httplib::to_string(res.error()) + ")";
            last_excerpt.clear();
        } else {
            last_status = res->status;
            last_detail = "HTTP " + std::to_string(res->status);
            last_excerpt = excerpt_of(res->body);
            transient = res->status >= 500 || res->status == 429;
        }
        if (!transient) break;
        if (attempt < retry.max_attempts) {
            std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
            delay_ms *= retry.backoff_factor;
        }
    }
    throw BackendError("POST " + url + " failed after retries: " + last_detail, last_status,
                       last_excerpt);
}

nlohmann::json parse_body(const std::string& body, const std::string& url) {
    try {
        return nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw BackendError("POST " + url + ": response is not JSON: " + e.what(), 200,
                           excerpt_of(body));
    }
}

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::string current;
    for (char c : path) {
        if (c == '.') {
            parts.push_back(current);
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    parts.push_back(current);
    return parts;
}

bool all_digits(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s) {
        if (c < '0' || c > '9') return false;
    }
    return true;
}

} // namespace

nlohmann::json json_path_get(const nlohmann::json& doc, const std::string& path) {
    const nlohmann::json* node = &doc;
    for (const std::string& part : split_path(path)) {
        if (all_digits(part) && node->is_array()) {
            const std::size_t idx = std::stoull(part);
            if (idx >= node->size()) {
                throw ConfigError("json path '" + path + "': index " + part + " out of range");
            }
            node = &(*node)[idx];
        } else if (node->is_object() && node->contains(part)) {
            node = &node->at(part);
        } else {
            throw ConfigError("json path '" + path + "': segment '" + part + "' not found");
        }
    }
    return *node;
}

void json_path_set(nlohmann::json& doc, const std::string& path, nlohmann::json value) {
    nlohmann::json* node = &doc;
    const auto parts = split_path(path);
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const std::string& part = parts[i];
        const bool last = i + 1 == parts.size();
        if (all_digits(part)) {
            const std::size_t idx = std::stoull(part);
            if (!node->is_array()) *node = nlohmann::json::array();
            while (node->size() <= idx) node->push_back(nullptr);
            if (last) {
                (*node)[idx] = std::move(value);
            } else {
                node = &(*node)[idx];
            }
        } else {
            if (!node->is_object()) *node = nlohmann::json::object();
            if (last) {
                (*node)[part] = std::move(value);
            } else {
                node = &(*node)[part];
            }
        }
    }
}

// ---------------------------------------------------------------------------
// HttpClassifier

HttpClassifier::HttpClassifier(std::string base_url, std::size_t batch_size, int timeout_s,
                               HttpRetryPolicy retry)
    : base_url_(std::move(base_url)), batch_size_(batch_size), timeout_s_(timeout_s),
      retry_(retry) {
    if (base_url_.empty()) throw ConfigError("HttpClassifier: base URL is empty");
    if (batch_size_ == 0) throw ConfigError("HttpClassifier: batch size must be >= 1");
}

std::vector<std::vector<double>> HttpClassifier::predict(const std::vector<std::string>& texts) {
    if (texts.empty()) return {};
    const std::string url = base_url_ + "/predict";
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (std::size_t start = 0; start < texts.size(); start += batch_size_) {
        const std::size_t end = std::min(texts.size(), start + batch_size_);
        nlohmann::json request;
        request["texts"] = std::vector<std::string>(texts.begin() + start, texts.begin() + end);
        const std::string body =
            post_json_with_retries(url, request.dump(), {}, timeout_s_, retry_);
        const nlohmann::json parsed = parse_body(body, url);
        if (!parsed.contains("probs") || !parsed["probs"].is_array()) {
            throw BackendError("classifier response missing \"probs\"", 200, excerpt_of(body));
        }
        for (const auto& row : parsed["probs"]) {
            out.push_back(row.get<std::vector<double>>());
        }
    }
    if (out.size() != texts.size()) {
        throw BackendError("classifier returned " + std::to_string(out.size()) +
                           " vectors for " + std::to_string(texts.size()) + " texts");
    }
    return out;
}

// ---------------------------------------------------------------------------
// HttpEmbedder

HttpEmbedder::HttpEmbedder(std::string base_url, std::size_t batch_size, int timeout_s,
                           HttpRetryPolicy retry)
    : base_url_(std::move(base_url)), batch_size_(batch_size), timeout_s_(timeout_s),
      retry_(retry) {
    if (base_url_.empty()) throw ConfigError("HttpEmbedder: base URL is empty");
    if (batch_size_ == 0) throw ConfigError("HttpEmbedder: batch size must be >= 1");
}

std::vector<std::vector<double>> HttpEmbedder::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) return {};
    const std::string url = base_url_ + "/embed";
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (std::size_t start = 0; start < texts.size(); start += batch_size_) {
        const std::size_t end = std::min(texts.size(), start + batch_size_);
        nlohmann::json request;
        request["texts"] = std::vector<std::string>(texts.begin() + start, texts.begin() + end);
        const std::string body =
            post_json_with_retries(url, request.dump(), {}, timeout_s_, retry_);
        const nlohmann::json parsed = parse_body(body, url);
        if (!parsed.contains("embeddings") || !parsed["embeddings"].is_array()) {
            throw BackendError("embedder response missing \"embeddings\"", 200, excerpt_of(body));
        }
        for (const auto& row : parsed["embeddings"]) {
            out.push_back(row.get<std::vector<double>>());
        }
    }
    if (out.size() != texts.size()) {
        throw BackendError("embedder returned " + std::to_string(out.size()) + " vectors for " +
                           std::to_string(texts.size()) + " texts");
    }
    return out;
}

// ---------------------------------------------------------------------------
// HttpLlm

LlmAdapterConfig LlmAdapterConfig::from_json(const nlohmann::json& j) {
    LlmAdapterConfig config;
    for (const auto& [key, value] : j.items()) {
        if (key == "endpoint") config.endpoint = value.get<std::string>();
        else if (key == "auth_env") config.auth_env = value.get<std::string>();
        else if (key == "auth_header") config.auth_header = value.get<std::string>();
        else if (key == "auth_prefix") config.auth_prefix = value.get<std::string>();
        else if (key == "request_template") config.request_template = value;
        else if (key == "prompt_path") config.prompt_path = value.get<std::string>();
        else if (key == "temperature_path") config.temperature_path = value.get<std::string>();
        else if (key == "seed_path") config.seed_path = value.get<std::string>();
        else if (key == "response_text_path") config.response_text_path = value.get<std::string>();
        else if (key == "timeout_s") config.timeout_s = value.get<int>();
        else throw ConfigError("llm adapter: unknown key '" + key + "'");
    }
    if (config.endpoint.empty()) throw ConfigError("llm adapter: 'endpoint' is required");
    if (config.prompt_path.empty()) throw ConfigError("llm adapter: 'prompt_path' is required");
    if (config.response_text_path.empty()) {
        throw ConfigError("llm adapter: 'response_text_path' is required");
    }
    return config;
}

HttpLlm::HttpLlm(LlmAdapterConfig config) : config_(std::move(config)) {
    if (!config_.auth_env.empty()) {
        const char* key = std::getenv(config_.auth_env.c_str());
        if (key != nullptr) api_key_ = key;
    }
}

std::string HttpLlm::complete(const std::string& prompt, double temperature,
                              std::optional<std::int64_t> seed_hint) {
    nlohmann::json request = config_.request_template;
    json_path_set(request, config_.prompt_path, prompt);
    if (!config_.temperature_path.empty()) {
        json_path_set(request, config_.temperature_path, temperature);
    }
    if (!config_.seed_path.empty() && seed_hint.has_value()) {
        json_path_set(request, config_.seed_path, *seed_hint);
    }

    httplib::Headers headers;
    if (!api_key_.empty()) {
        headers.emplace(config_.auth_header, config_.auth_prefix + api_key_);
    }
    const std::string body = post_json_with_retries(config_.endpoint, request.dump(), headers,
                                                    config_.timeout_s, config_.retry);
    const nlohmann::json parsed = parse_body(body, config_.endpoint);
    nlohmann::json text;
    try {
        text = json_path_get(parsed, config_.response_text_path);
    } catch (const ConfigError& e) {
        throw BackendError("llm response missing text at '" + config_.response_text_path +
                           "': " + e.what(), 200, excerpt_of(body));
    }
    if (!text.is_string()) {
        throw BackendError("llm response text at '" + config_.response_text_path +
                           "' is not a string", 200, excerpt_of(body));
    }
    std::string completion = text.get<std::string>();
    if (completion.empty()) {
        throw BackendError("llm returned an empty completion", 200, excerpt_of(body));
    }
    return completion;
}

} // namespace limellm
