#include "limellm/runconfig.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace limellm {
namespace {

nlohmann::json parse_json_file(const std::filesystem::path& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw ConfigError(std::string(what) + ": cannot read " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string(what) + " " + path.string() + ": " + e.what());
    }
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                    const std::string& context) {
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const char* k : allowed) {
            if (key == k) {
                known = true;
                break;
            }
        }
        if (!known) throw ConfigError(context + ": unknown key '" + key + "'");
    }
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

std::string env_or_empty(const char* name) {
    const char* value = std::getenv(name);
    return value == nullptr ? std::string() : std::string(value);
}

PromptSpec load_prompt_spec(const std::filesystem::path& path) {
    const nlohmann::json j = parse_json_file(path, "prompt spec");
    reject_unknown(j,
                   {"dataset_description", "label_names", "negative_constraints",
                    "template_version", "template_path"},
                   "prompt spec");
    if (!j.contains("dataset_description") || !j.contains("label_names")) {
        throw ConfigError("prompt spec " + path.string() +
                          ": 'dataset_description' and 'label_names' are required");
    }
    std::string template_text;
    std::string version = get_or<std::string>(j, "template_version", "v1");
    if (j.contains("template_path")) {
        const std::filesystem::path tpl =
            path.parent_path() / j.at("template_path").get<std::string>();
        std::ifstream in(tpl);
        if (!in) throw ConfigError("prompt template: cannot read " + tpl.string());
        std::ostringstream buffer;
        buffer << in.rdbuf();
        template_text = buffer.str();
    }
    return PromptSpec::make(j.at("dataset_description").get<std::string>(),
                            j.at("label_names").get<std::vector<std::string>>(),
                            get_or<std::vector<std::string>>(j, "negative_constraints", {}),
                            std::move(version), std::move(template_text));
}

} // namespace

RunConfig RunConfig::load(const std::filesystem::path& path) {
    return from_json(parse_json_file(path, "config"), path.parent_path());
}

RunConfig RunConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    reject_unknown(j,
                   {"method", "sampling", "generation", "kernel_mode", "lambda",
                    "hybrid_bow_weight", "baseline", "prompt_spec", "backends", "pooling",
                    "score_ranking", "seeds", "parallel", "cache_dir"},
                   "config");

    RunConfig config;
    config.method = get_or<std::string>(j, "method", "lime-llm");
    if (config.method != "lime-llm" && config.method != "lime-standard") {
        throw ConfigError("config.method must be lime-llm or lime-standard, got '" +
                          config.method + "'");
    }

    if (j.contains("sampling")) {
        const auto& s = j.at("sampling");
        reject_unknown(s,
                       {"n_samples", "boundary_fraction", "max_masked_fraction",
                        "saliency_temperature"},
                       "config.sampling");
        config.sampling.n_samples = get_or<int>(s, "n_samples", config.sampling.n_samples);
        config.sampling.boundary_fraction =
            get_or<double>(s, "boundary_fraction", config.sampling.boundary_fraction);
        config.sampling.max_masked_fraction =
            get_or<double>(s, "max_masked_fraction", config.sampling.max_masked_fraction);
        config.sampling.saliency_temperature =
            get_or<double>(s, "saliency_temperature", config.sampling.saliency_temperature);
    }
    config.sampling.validate();

    if (j.contains("generation")) {
        const auto& g = j.at("generation");
        reject_unknown(g, {"max_retries", "min_neighborhood", "temperature"},
                       "config.generation");
        config.generation.max_retries =
            get_or<int>(g, "max_retries", config.generation.max_retries);
        config.generation.min_neighborhood =
            get_or<int>(g, "min_neighborhood", config.generation.min_neighborhood);
        config.generation.temperature =
            get_or<double>(g, "temperature", config.generation.temperature);
    }
    config.generation.validate();

    config.kernel_mode = kernel_mode_from_string(get_or<std::string>(j, "kernel_mode", "hybrid"));
    config.lambda = get_or<double>(j, "lambda", config.lambda);
    if (config.lambda < 0.0) throw ConfigError("config.lambda must be >= 0");
    config.hybrid_bow_weight = get_or<double>(j, "hybrid_bow_weight", config.hybrid_bow_weight);
    if (config.hybrid_bow_weight < 0.0 || config.hybrid_bow_weight > 1.0) {
        throw ConfigError("config.hybrid_bow_weight must lie in [0,1]");
    }

    if (j.contains("baseline")) {
        const auto& b = j.at("baseline");
        reject_unknown(b, {"n_samples", "sigma", "lambda"}, "config.baseline");
        config.baseline.n_samples = get_or<int>(b, "n_samples", config.baseline.n_samples);
        config.baseline.sigma = get_or<double>(b, "sigma", config.baseline.sigma);
        config.baseline.lambda = get_or<double>(b, "lambda", config.baseline.lambda);
    }
    config.baseline.validate();

    if (j.contains("prompt_spec")) {
        config.prompt = load_prompt_spec(base_dir / j.at("prompt_spec").get<std::string>());
        config.has_prompt = true;
    }

    config.pooling = pooling_from_string(get_or<std::string>(j, "pooling", "micro"));
    config.score_ranking =
        score_ranking_from_string(get_or<std::string>(j, "score_ranking", "signed"));
    config.seeds = get_or<std::vector<std::int64_t>>(j, "seeds", {0});
    if (config.seeds.empty()) throw ConfigError("config.seeds must be non-empty");
    config.parallel = get_or<int>(j, "parallel", 4);
    if (config.parallel < 1) throw ConfigError("config.parallel must be >= 1");
    config.cache_dir = get_or<std::string>(j, "cache_dir", "");

    if (j.contains("backends")) {
        config.backends = j.at("backends");
        reject_unknown(config.backends, {"classifier", "llm", "embedder"}, "config.backends");
    }
    return config;
}

BackendSet build_backends(const RunConfig& config, const std::string& cache_dir_override) {
    BackendSet set;

    std::string cache_dir = cache_dir_override;
    if (cache_dir.empty()) cache_dir = config.cache_dir;
    if (cache_dir.empty()) cache_dir = env_or_empty(kEnvCacheDir);
    if (!cache_dir.empty()) {
        set.cache = std::make_unique<ResponseCache>(cache_dir);
    }

    const nlohmann::json& b = config.backends;

    // Classifier (required).
    {
        nlohmann::json spec = b.contains("classifier") ? b.at("classifier")
                                                       : nlohmann::json{{"type", "http"}};
        const std::string type = spec.value("type", "http");
        if (type == "mock") {
            reject_unknown(spec, {"type", "lexicon", "ood_mode"}, "backends.classifier");
            if (!spec.contains("lexicon")) {
                throw ConfigError("backends.classifier: mock requires 'lexicon'");
            }
            std::map<std::string, std::vector<double>> lexicon;
            for (const auto& [token, weights] : spec.at("lexicon").items()) {
                lexicon[token] = weights.get<std::vector<double>>();
            }
            const std::string ood = spec.value("ood_mode", "off");
            OodMode mode;
            if (ood == "off") mode = OodMode::Off;
            else if (ood == "token_count_penalty") mode = OodMode::TokenCountPenalty;
            else throw ConfigError("backends.classifier.ood_mode must be off|token_count_penalty");
            auto mock = std::make_unique<MockClassifier>(std::move(lexicon), mode);
            set.mock_classifier = mock.get();
            set.ood_sequential = mode == OodMode::TokenCountPenalty;
            set.classifier_impl = std::move(mock);
        } else if (type == "http") {
            reject_unknown(spec, {"type", "url", "batch_size", "timeout_s"},
                           "backends.classifier");
            std::string url = spec.value("url", "");
            if (url.empty()) url = env_or_empty(kEnvClassifierUrl);
            if (url.empty()) {
                throw ConfigError("backends.classifier: no 'url' and " +
                                  std::string(kEnvClassifierUrl) + " is unset");
            }
            set.classifier_impl = std::make_unique<HttpClassifier>(
                url, spec.value("batch_size", std::size_t{32}), spec.value("timeout_s", 30));
        } else {
            throw ConfigError("backends.classifier.type must be http|mock");
        }
        set.classifier = set.classifier_impl.get();
        if (set.cache) {
            set.classifier_wrapper =
                std::make_unique<CachedClassifier>(*set.classifier_impl, *set.cache, "classifier");
            set.classifier = set.classifier_wrapper.get();
        }
    }

    // LLM (needed for lime-llm explains).
    if (b.contains("llm")) {
        const nlohmann::json& spec = b.at("llm");
        const std::string type = spec.value("type", "http");
        if (type == "mock") {
            reject_unknown(spec, {"type", "neutral_lexicon", "boundary_lexicon"},
                           "backends.llm");
            if (!spec.contains("neutral_lexicon") || !spec.contains("boundary_lexicon")) {
                throw ConfigError(
                    "backends.llm: mock requires 'neutral_lexicon' and 'boundary_lexicon'");
            }
            std::map<std::string, std::vector<std::string>> boundary;
            for (const auto& [label, words] : spec.at("boundary_lexicon").items()) {
                boundary[label] = words.get<std::vector<std::string>>();
            }
            set.llm_impl = std::make_unique<MockLlm>(
                spec.at("neutral_lexicon").get<std::vector<std::string>>(), std::move(boundary));
        } else if (type == "http") {
            reject_unknown(spec, {"type", "adapter"}, "backends.llm");
            if (!spec.contains("adapter")) {
                throw ConfigError("backends.llm: http requires an 'adapter' config path");
            }
            const std::filesystem::path adapter_path = spec.at("adapter").get<std::string>();
            const nlohmann::json adapter = parse_json_file(adapter_path, "llm adapter");
            set.llm_impl = std::make_unique<HttpLlm>(LlmAdapterConfig::from_json(adapter));
        } else {
            throw ConfigError("backends.llm.type must be http|mock");
        }
        set.llm = set.llm_impl.get();
        if (set.cache) {
            set.llm_wrapper = std::make_unique<CachedLlm>(*set.llm_impl, *set.cache, "llm",
                                                          config.prompt.template_version);
            set.llm = set.llm_wrapper.get();
        }
    }

    // Embedder (needed for embedding/hybrid kernel modes).
    if (b.contains("embedder")) {
        const nlohmann::json& spec = b.at("embedder");
        const std::string type = spec.value("type", "http");
        if (type == "mock") {
            reject_unknown(spec, {"type"}, "backends.embedder");
            set.embedder_impl = std::make_unique<MockEmbedder>();
        } else if (type == "http") {
            reject_unknown(spec, {"type", "url", "batch_size", "timeout_s"},
                           "backends.embedder");
            std::string url = spec.value("url", "");
            if (url.empty()) url = env_or_empty(kEnvEmbedderUrl);
            if (url.empty()) {
                throw ConfigError("backends.embedder: no 'url' and " +
                                  std::string(kEnvEmbedderUrl) + " is unset");
            }
            set.embedder_impl = std::make_unique<HttpEmbedder>(
                url, spec.value("batch_size", std::size_t{32}), spec.value("timeout_s", 30));
        } else {
            throw ConfigError("backends.embedder.type must be http|mock");
        }
        set.embedder = set.embedder_impl.get();
        if (set.cache) {
            set.embedder_wrapper =
                std::make_unique<CachedEmbedder>(*set.embedder_impl, *set.cache, "embedder");
            set.embedder = set.embedder_wrapper.get();
        }
    }

    return set;
}

} // namespace limellm
