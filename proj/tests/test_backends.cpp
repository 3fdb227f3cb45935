#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <thread>

#include <httplib.h>

#include "limellm/backends.hpp"
#include "limellm/detail/sha256.hpp"

using namespace limellm;

namespace {

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("limellm-test-" + tag + "-" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

// Shared contract checks every classifier implementation must satisfy.
void check_classifier_contract(ClassifierBackend& classifier) {
    CHECK(classifier.predict({}).empty());
    const auto probs = classifier.predict({"good movie", "bad movie"});
    REQUIRE(probs.size() == 2);
    for (const auto& p : probs) {
        REQUIRE(p.size() >= 2);
        double sum = 0.0;
        for (double v : p) sum += v;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
    // determinism
    CHECK(classifier.predict({"good movie"}) == classifier.predict({"good movie"}));
}

// Shared contract checks every embedder implementation must satisfy.
void check_embedder_contract(EmbeddingBackend& embedder) {
    CHECK(embedder.embed({}).empty());
    const auto vectors = embedder.embed({"one text", "another text", "one text"});
    REQUIRE(vectors.size() == 3);
    const std::size_t dim = vectors[0].size();
    REQUIRE(dim > 0);
    for (const auto& v : vectors) {
        CHECK(v.size() == dim);  // consistent dimension
        for (double x : v) CHECK(std::isfinite(x));
    }
    CHECK(vectors[0] == vectors[2]);  // determinism
}

} // namespace

TEST_CASE("sha256 known vector") {
    CHECK(detail::sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(detail::sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("mock classifier softmax values and empty-hit behavior") {
    MockClassifier classifier({{"bad", {0.0, 2.0}}});
    const auto probs = classifier.predict({"bad", "nothing here"});
    // e^2 / (1 + e^2)
    CHECK(probs[0][1] == doctest::Approx(0.8808).epsilon(1e-3));
    CHECK(probs[0][0] == doctest::Approx(1.0 - probs[0][1]).epsilon(1e-12));
    CHECK(probs[1][0] == doctest::Approx(0.5));
    CHECK(probs[1][1] == doctest::Approx(0.5));
    check_classifier_contract(classifier);
}

TEST_CASE("mock classifier token-count penalty returns uniform off-reference") {
    MockClassifier classifier({{"bad", {0.0, 2.0}}}, OodMode::TokenCountPenalty);
    classifier.set_reference_token_count(3);
    const auto probs = classifier.predict({"bad movie here", "bad movie", ""});
    CHECK(probs[0][1] > 0.8);                    // on-reference: real prediction
    CHECK(probs[1][0] == doctest::Approx(0.5));  // deletion-shortened: uniform
    CHECK(probs[2][0] == doctest::Approx(0.5));
}

TEST_CASE("mock llm fills slots per strategy and preserves anchors") {
    MockLlm llm({"film", "show"}, {{"positive", {"great", "lovely"}}});
    const std::string prompt =
        "header\n"
        "Hypothesis 0 (keep the label \"negative\"):\n"
        "Template: The [SLOT_0] was bad\n"
        "Hypothesis 1 (change the label to \"positive\"; do not use \"bad\" or any synonym of it):\n"
        "Template: The movie was [SLOT_0]\n"
        "footer\n";
    const std::string out = llm.complete(prompt, 0.7);
    CHECK(out == "0: The film was bad\n1: The movie was great\n");
}

TEST_CASE("mock llm cycles its lexicons deterministically within a call") {
    MockLlm llm({"one", "two"}, {{"pos", {"p1"}}});
    const std::string prompt =
        "Hypothesis 0 (keep the label \"neg\"):\n"
        "Template: [SLOT_0] x [SLOT_1] y [SLOT_2]\n";
    CHECK(llm.complete(prompt, 0.0) == "0: one x two y one\n");
    // fresh call restarts the cycle
    CHECK(llm.complete(prompt, 0.0) == "0: one x two y one\n");
}

TEST_CASE("mock llm emits one line per template and rejects non-prompts") {
    MockLlm llm({"w"}, {{"pos", {"p"}}});
    std::string prompt;
    for (int i = 0; i < 20; ++i) {
        prompt += "Hypothesis " + std::to_string(i) + " (keep the label \"neg\"):\n";
        prompt += "Template: a [SLOT_0] b\n";
    }
    const std::string out = llm.complete(prompt, 0.0);
    std::size_t lines = 0;
    for (char c : out) lines += c == '\n';
    CHECK(lines == 20);
    CHECK_THROWS_AS(llm.complete("banana", 0.0), MalformedPromptError);
}

TEST_CASE("mock embedder: equal texts equal vectors, disjoint texts orthogonal") {
    MockEmbedder embedder;
    check_embedder_contract(embedder);
    const auto vecs = embedder.embed({"a b", "a b", "c d"});
    REQUIRE(vecs.size() == 3);
    CHECK(vecs[0] == vecs[1]);
    double norm = 0.0;
    double dot = 0.0;
    for (std::size_t i = 0; i < vecs[0].size(); ++i) {
        norm += vecs[0][i] * vecs[0][i];
        dot += vecs[0][i] * vecs[2][i];
    }
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
    REQUIRE(MockEmbedder::bucket_of("a") != MockEmbedder::bucket_of("c"));
    REQUIRE(MockEmbedder::bucket_of("a") != MockEmbedder::bucket_of("d"));
    REQUIRE(MockEmbedder::bucket_of("b") != MockEmbedder::bucket_of("c"));
    REQUIRE(MockEmbedder::bucket_of("b") != MockEmbedder::bucket_of("d"));
    CHECK(dot == doctest::Approx(0.0));
}

TEST_CASE("cache: second identical request does not hit the backend") {
    TempDir dir("cache");
    ResponseCache cache(dir.path);
    std::atomic<int> calls{0};
    const CacheKey key = make_cache_key("llm", {{"prompt", "hello"}});
    const auto call = [&] {
        ++calls;
        return std::string("response-bytes");
    };
    CHECK(cache.get_or_call(key, call) == "response-bytes");
    CHECK(cache.get_or_call(key, call) == "response-bytes");
    CHECK(calls.load() == 1);
    CHECK(cache.io_warnings() == 0);

    // the canonicalized digest is insensitive to key order
    const CacheKey same = make_cache_key("llm", nlohmann::json::parse(R"({"prompt": "hello"})"));
    CHECK(same.digest_hex == key.digest_hex);
}

TEST_CASE("cache keys separate backends, temperatures, and context tags") {
    const CacheKey a = make_cache_key("llm", {{"prompt", "x"}, {"temperature", 0.7}});
    const CacheKey b = make_cache_key("llm", {{"prompt", "x"}, {"temperature", 0.2}});
    const CacheKey c = make_cache_key("classifier", {{"prompt", "x"}, {"temperature", 0.7}});
    CHECK(a.digest_hex != b.digest_hex);
    CHECK(a.digest_hex != c.digest_hex);
}

TEST_CASE("cached wrappers replay deterministic backends byte-for-byte") {
    TempDir dir("wrapper");
    ResponseCache cache(dir.path);
    MockClassifier classifier({{"bad", {0.0, 2.0}}});
    CachedClassifier cached(classifier, cache, "classifier");

    const auto direct = classifier.predict({"bad stuff"});
    const auto first = cached.predict({"bad stuff"});
    const auto second = cached.predict({"bad stuff"});
    CHECK(first == direct);
    CHECK(second == direct);

    MockLlm llm({"w"}, {{"pos", {"p"}}});
    CachedLlm cached_llm(llm, cache, "llm", "v1");
    const std::string prompt =
        "Hypothesis 0 (keep the label \"neg\"):\nTemplate: a [SLOT_0]\n";
    CHECK(cached_llm.complete(prompt, 0.7) == llm.complete(prompt, 0.7));
    CHECK(cached_llm.complete(prompt, 0.7) == llm.complete(prompt, 0.7));

    MockEmbedder embedder;
    CachedEmbedder cached_embedder(embedder, cache, "embedder");
    CHECK(cached_embedder.embed({"x y"}) == embedder.embed({"x y"}));
    CHECK(cached_embedder.embed({"x y"}) == embedder.embed({"x y"}));
}

TEST_CASE("cache falls through to the live call when the directory is unwritable") {
    ResponseCache cache("/proc/definitely-not-writable/cache");
    std::atomic<int> calls{0};
    const CacheKey key = make_cache_key("llm", {{"p", 1}});
    const auto call = [&] {
        ++calls;
        return std::string("live");
    };
    CHECK(cache.get_or_call(key, call) == "live");
    CHECK(cache.get_or_call(key, call) == "live");
    CHECK(calls.load() == 2);
    CHECK(cache.io_warnings() >= 2);
}

TEST_CASE("json path get/set handles objects and array indices") {
    nlohmann::json doc;
    json_path_set(doc, "messages.0.content", "hello");
    json_path_set(doc, "messages.0.role", "user");
    json_path_set(doc, "temperature", 0.7);
    CHECK(doc["messages"][0]["content"] == "hello");
    CHECK(json_path_get(doc, "messages.0.role") == "user");
    CHECK(json_path_get(doc, "temperature") == 0.7);
    CHECK_THROWS_AS(json_path_get(doc, "missing.key"), ConfigError);
    CHECK_THROWS_AS(json_path_get(doc, "messages.5.content"), ConfigError);
}

TEST_CASE("retry policy defaults: base 500 ms, factor 2, 3 attempts") {
    const HttpRetryPolicy policy;
    CHECK(policy.max_attempts == 3);
    CHECK(policy.backoff_base_ms == 500);
    CHECK(policy.backoff_factor == 2);
}

TEST_CASE("http classifier: batching, retry exhaustion, and recovery") {
    httplib::Server server;
    std::atomic<int> predict_calls{0};
    std::atomic<int> flaky_calls{0};
    server.Post("/predict", [&](const httplib::Request& req, httplib::Response& res) {
        ++predict_calls;
        const auto body = nlohmann::json::parse(req.body);
        nlohmann::json out;
        auto probs = nlohmann::json::array();
        for (const auto& text : body.at("texts")) {
            const bool good = text.get<std::string>().find("good") != std::string::npos;
            probs.push_back({good ? 0.2 : 0.8, good ? 0.8 : 0.2});
        }
        out["probs"] = probs;
        res.set_content(out.dump(), "application/json");
    });
    server.Post("/flaky/predict", [&](const httplib::Request& req, httplib::Response& res) {
        if (++flaky_calls <= 2) {
            res.status = 503;
            return;
        }
        const auto body = nlohmann::json::parse(req.body);
        nlohmann::json out;
        auto probs = nlohmann::json::array();
        for (std::size_t i = 0; i < body.at("texts").size(); ++i) probs.push_back({0.5, 0.5});
        out["probs"] = probs;
        res.set_content(out.dump(), "application/json");
    });
    server.Post("/broken/predict", [&](const httplib::Request&, httplib::Response& res) {
        res.status = 500;
        res.set_content("boom", "text/plain");
    });

    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    const std::string base = "http://127.0.0.1:" + std::to_string(port);

    {
        HttpClassifier classifier(base, /*batch_size=*/2);
        check_classifier_contract(classifier);

        predict_calls = 0;
        const auto probs = classifier.predict({"a", "b", "c", "d", "e"});
        CHECK(probs.size() == 5);
        CHECK(predict_calls.load() == 3);  // ceil(5 / 2) batches
    }
    {
        HttpRetryPolicy fast{3, 10, 2};
        HttpClassifier flaky(base + "/flaky", 32, 5, fast);
        CHECK(flaky.predict({"x"}).size() == 1);  // two 503s then success
        CHECK(flaky_calls.load() == 3);

        HttpClassifier broken(base + "/broken", 32, 5, fast);
        try {
            broken.predict({"x"});
            FAIL("expected BackendError");
        } catch (const BackendError& e) {
            CHECK(e.status() == 500);
            CHECK(e.body_excerpt() == "boom");
        }
    }
    {
        // nothing listening here
        HttpRetryPolicy fast{2, 5, 2};
        HttpClassifier offline("http://127.0.0.1:1", 32, 1, fast);
        CHECK_THROWS_AS(offline.predict({"x"}), BackendError);
    }

    server.stop();
    server_thread.join();
}

TEST_CASE("http llm adapter maps prompt in and completion text out") {
    httplib::Server server;
    std::string seen_auth;
    server.Post("/v1/chat", [&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        const auto body = nlohmann::json::parse(req.body);
        const std::string prompt = body.at("messages").at(0).at("content").get<std::string>();
        nlohmann::json out;
        out["choices"] = {{{"message", {{"content", "echo: " + prompt}}}}};
        res.set_content(out.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ::setenv("LIMELLE_LLM_API_KEY", "sekrit", 1);
    LlmAdapterConfig config;
    config.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat";
    config.auth_env = "LIMELLE_LLM_API_KEY";
    config.request_template = nlohmann::json::parse(
        R"({"model": "test-model", "messages": [{"role": "user", "content": ""}]})");
    config.prompt_path = "messages.0.content";
    config.temperature_path = "temperature";
    config.response_text_path = "choices.0.message.content";
    config.retry = {2, 5, 2};

    HttpLlm llm(config);
    CHECK(llm.complete("fill this", 0.7) == "echo: fill this");
    CHECK(seen_auth == "Bearer sekrit");

    server.stop();
    server_thread.join();
}

TEST_CASE("http embedder shape contract") {
    httplib::Server server;
    server.Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
        const auto body = nlohmann::json::parse(req.body);
        nlohmann::json out;
        auto embeddings = nlohmann::json::array();
        for (std::size_t i = 0; i < body.at("texts").size(); ++i) {
            embeddings.push_back({1.0, 0.0, 0.5});
        }
        out["embeddings"] = embeddings;
        res.set_content(out.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpEmbedder embedder("http://127.0.0.1:" + std::to_string(port));
    check_embedder_contract(embedder);
    const auto vectors = embedder.embed({"a", "b"});
    REQUIRE(vectors.size() == 2);
    CHECK(vectors[0].size() == 3);
    CHECK(embedder.embed({}).empty());

    server.stop();
    server_thread.join();
}
