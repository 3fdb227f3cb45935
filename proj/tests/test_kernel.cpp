#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "limellm/backends.hpp"
#include "limellm/kernel.hpp"
#include "limellm/tokenization.hpp"

using namespace limellm;

TEST_CASE("bow_cosine on identical, disjoint, and half-overlapping lists") {
    const auto a = tokenize("x y");
    CHECK(bow_cosine(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(bow_cosine(tokenize("a b"), tokenize("c d")) == doctest::Approx(0.0));
    // [x,y] vs [x,z]: 1 / (sqrt(2)*sqrt(2)) = 0.5
    CHECK(bow_cosine(tokenize("x y"), tokenize("x z")) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(bow_cosine({}, a), EmptyInputError);
}

TEST_CASE("bow_cosine counts repeated surfaces") {
    // counts (2,1) vs (1,1): (2+1)/(sqrt(5)*sqrt(2))
    const double expected = 3.0 / (std::sqrt(5.0) * std::sqrt(2.0));
    CHECK(bow_cosine(tokenize("a a b"), tokenize("a b")) ==
          doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("embedding_cosine via the hashed mock embedder") {
    MockEmbedder embedder;
    CHECK(embedding_cosine("a b", "a b", embedder) == doctest::Approx(1.0).epsilon(1e-6));

    // Curated, collision-free surfaces hash to distinct buckets.
    REQUIRE(MockEmbedder::bucket_of("alpha") != MockEmbedder::bucket_of("omega"));
    REQUIRE(MockEmbedder::bucket_of("alpha") != MockEmbedder::bucket_of("beta"));
    REQUIRE(MockEmbedder::bucket_of("beta") != MockEmbedder::bucket_of("omega"));
    CHECK(embedding_cosine("alpha", "omega", embedder) == doctest::Approx(0.0));

    // "a a b" -> counts (2,1), "a b" -> (1,1): same analytic value as BoW.
    REQUIRE(MockEmbedder::bucket_of("a") != MockEmbedder::bucket_of("b"));
    const double expected = 3.0 / (std::sqrt(5.0) * std::sqrt(2.0));
    CHECK(embedding_cosine("a a b", "a b", embedder) == doctest::Approx(expected).epsilon(1e-12));

    CHECK_THROWS_AS(embedding_cosine("", "a", embedder), ZeroVectorError);
}

TEST_CASE("hybrid_proximity blends per mode") {
    CHECK(blend_proximity(0.6, 0.8, KernelMode::Hybrid) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(blend_proximity(0.6, 0.8, KernelMode::BowOnly) == doctest::Approx(0.6));
    CHECK(blend_proximity(0.6, 0.8, KernelMode::EmbeddingOnly) == doctest::Approx(0.8));
    // Negative embedding cosine clamps to zero before averaging.
    CHECK(blend_proximity(0.6, -0.2, KernelMode::EmbeddingOnly) == doctest::Approx(0.0));
    CHECK(blend_proximity(0.6, -0.2, KernelMode::Hybrid) == doctest::Approx(0.3));

    MockEmbedder embedder;
    const auto tokens = tokenize("p q r");
    for (KernelMode mode : {KernelMode::BowOnly, KernelMode::EmbeddingOnly, KernelMode::Hybrid}) {
        CHECK(hybrid_proximity(tokens, tokens, "p q r", "p q r", mode, &embedder) ==
              doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("property: proximity is symmetric, bounded, and a midpoint blend") {
    MockEmbedder embedder;
    std::mt19937_64 rng(3);
    const std::vector<std::string> vocab = {"red", "blue", "green", "cyan", "pink", "grey"};
    for (int trial = 0; trial < 100; ++trial) {
        std::string ta;
        std::string tb;
        const auto draw = [&](std::string& text) {
            const std::size_t d = 1 + rng() % 6;
            for (std::size_t j = 0; j < d; ++j) {
                if (!text.empty()) text += ' ';
                text += vocab[rng() % vocab.size()];
            }
        };
        draw(ta);
        draw(tb);
        const auto a = tokenize(ta);
        const auto b = tokenize(tb);
        for (KernelMode mode :
             {KernelMode::BowOnly, KernelMode::EmbeddingOnly, KernelMode::Hybrid}) {
            const double ab = hybrid_proximity(a, b, ta, tb, mode, &embedder);
            const double ba = hybrid_proximity(b, a, tb, ta, mode, &embedder);
            CHECK(std::abs(ab - ba) < 1e-12);
            CHECK(ab >= 0.0);
            CHECK(ab <= 1.0);
        }
        const double bow = hybrid_proximity(a, b, ta, tb, KernelMode::BowOnly, &embedder);
        const double emb = hybrid_proximity(a, b, ta, tb, KernelMode::EmbeddingOnly, &embedder);
        const double hyb = hybrid_proximity(a, b, ta, tb, KernelMode::Hybrid, &embedder);
        CHECK(hyb == doctest::Approx((bow + emb) / 2.0).epsilon(1e-12));
        CHECK(hyb >= std::min(bow, emb) - 1e-12);
        CHECK(hyb <= std::max(bow, emb) + 1e-12);
    }
}

TEST_CASE("exponential kernel values") {
    CHECK(exponential_kernel(0.0, 0.75) == doctest::Approx(1.0));
    CHECK(exponential_kernel(0.75, 0.75) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(exponential_kernel(0.75, 0.75) == doctest::Approx(0.3679).epsilon(1e-4));
    CHECK_THROWS_AS(exponential_kernel(0.5, 0.0), ConfigError);
    // The default width every config starts from.
    CHECK(kDefaultKernelSigma == doctest::Approx(0.75));
}

TEST_CASE("kernel mode names round-trip") {
    for (KernelMode mode : {KernelMode::BowOnly, KernelMode::EmbeddingOnly, KernelMode::Hybrid}) {
        CHECK(kernel_mode_from_string(kernel_mode_name(mode)) == mode);
    }
    CHECK_THROWS_AS(kernel_mode_from_string("nope"), ConfigError);
}
