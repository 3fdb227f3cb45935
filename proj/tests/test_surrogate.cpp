#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "limellm/jsonio.hpp"
#include "limellm/surrogate.hpp"
#include "support/oracles.hpp"

using namespace limellm;

namespace {

struct RandomSystem {
    std::vector<std::vector<std::uint8_t>> rows;
    std::vector<double> targets;
    std::vector<double> weights;

    std::vector<std::vector<double>> rows_as_double() const {
        std::vector<std::vector<double>> out;
        out.reserve(rows.size());
        for (const auto& row : rows) {
            out.emplace_back(row.begin(), row.end());
        }
        return out;
    }
};

// Random binary system; when require_full_rank is set, regenerates until the
// lambda=0 normal equations are solvable (oracle-side check).
RandomSystem make_system(std::mt19937_64& rng, std::size_t n, std::size_t d,
                         bool require_full_rank) {
    while (true) {
        RandomSystem sys;
        sys.rows.resize(n, std::vector<std::uint8_t>(d, 0));
        for (auto& row : sys.rows) {
            for (auto& bit : row) bit = rng() % 2;
        }
        sys.targets.resize(n);
        sys.weights.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            sys.targets[i] = oracles::unit_uniform(rng);
            sys.weights[i] = 0.05 + 0.95 * oracles::unit_uniform(rng);
        }
        if (!require_full_rank) return sys;
        try {
            oracles::ridge_normal_equations(sys.rows_as_double(), sys.targets, sys.weights, 0.0);
            return sys;
        } catch (const std::runtime_error&) {
            // rank-deficient draw; try again
        }
    }
}

} // namespace

TEST_CASE("DesignMatrix validates shapes, weights, and targets") {
    CHECK_NOTHROW(DesignMatrix::make({{1, 0}, {0, 1}}, {0.5, 0.5}, {1.0, 0.5}));
    CHECK_THROWS_AS(DesignMatrix::make({{1, 0}, {0}}, {0.5, 0.5}, {1.0, 1.0}),
                    LengthMismatchError);
    CHECK_THROWS_AS(DesignMatrix::make({{1, 0}}, {0.5}, {-1.0}), InvariantError);
    CHECK_THROWS_AS(DesignMatrix::make({{1, 0}}, {0.5}, {0.0}), InvariantError);
    CHECK_THROWS_AS(DesignMatrix::make({{1, 0}}, {1.5}, {1.0}), InvariantError);
    CHECK_THROWS_AS(DesignMatrix::make({{1, 0}}, {std::nan("")}, {1.0}), NonFiniteInputError);
}

TEST_CASE("constant targets with regularization shrink weights to zero") {
    std::mt19937_64 rng(21);
    const RandomSystem sys = [&] {
        RandomSystem s = make_system(rng, 12, 4, false);
        for (double& y : s.targets) y = 0.6;
        return s;
    }();
    const auto design = DesignMatrix::make(sys.rows, sys.targets, sys.weights);
    const SurrogateFit fit = fit_weighted_ridge(design, 0.01);
    for (double w : fit.weights()) {
        CHECK(std::abs(w) < 1e-8);
    }
    CHECK(fit.intercept() == doctest::Approx(0.6).epsilon(1e-6));
}

TEST_CASE("exact interpolation at lambda=0 recovers planted coefficients") {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t d = 2 + rng() % 4;
        const std::size_t n = d + 3 + rng() % 6;
        RandomSystem sys = make_system(rng, n, d, true);
        std::vector<double> planted(d);
        // scaled so every target stays inside [0,1]
        for (double& w : planted) {
            w = (oracles::unit_uniform(rng) - 0.5) * 0.8 / static_cast<double>(d);
        }
        const double intercept = 0.45 + 0.1 * oracles::unit_uniform(rng);
        for (std::size_t i = 0; i < n; ++i) {
            double y = intercept;
            for (std::size_t a = 0; a < d; ++a) y += planted[a] * sys.rows[i][a];
            sys.targets[i] = y;  // stays within [0,1] by construction
        }
        const auto design = DesignMatrix::make(sys.rows, sys.targets, sys.weights);
        const SurrogateFit fit = fit_weighted_ridge(design, 0.0);
        for (std::size_t a = 0; a < d; ++a) {
            CHECK(fit.weights()[a] == doctest::Approx(planted[a]).epsilon(1e-8));
        }
        CHECK(fit.intercept() == doctest::Approx(intercept).epsilon(1e-8));
        CHECK(fit.weighted_sse() < 1e-12);
        CHECK(fit.sample_count() == n);
    }
}

TEST_CASE("fit matches the dense normal-equation oracle elementwise") {
    std::mt19937_64 rng(23);
    const double lambdas[] = {0.0, 0.01, 1.0};
    for (int trial = 0; trial < 60; ++trial) {
        const double lambda = lambdas[trial % 3];
        const std::size_t d = 2 + rng() % 3;
        const std::size_t n = 8 + rng() % 5;
        const RandomSystem sys = make_system(rng, n, d, lambda == 0.0);
        const auto design = DesignMatrix::make(sys.rows, sys.targets, sys.weights);
        const SurrogateFit fit = fit_weighted_ridge(design, lambda);
        const auto oracle =
            oracles::ridge_normal_equations(sys.rows_as_double(), sys.targets, sys.weights, lambda);
        for (std::size_t a = 0; a < d; ++a) {
            CHECK(std::abs(fit.weights()[a] - oracle.weights[a]) < 1e-8);
        }
        CHECK(std::abs(fit.intercept() - oracle.intercept) < 1e-8);
    }
}

TEST_CASE("property: closed form agrees with the gradient-descent oracle") {
    std::mt19937_64 rng(24);
    const double lambdas[] = {0.0, 0.01, 1.0};
    for (int trial = 0; trial < 1000; ++trial) {
        const double lambda = lambdas[trial % 3];
        const std::size_t d = 2 + rng() % 3;  // small systems keep GD honest and fast
        const std::size_t n = d + 4 + rng() % 5;
        const RandomSystem sys = make_system(rng, n, d, lambda == 0.0);
        const auto design = DesignMatrix::make(sys.rows, sys.targets, sys.weights);
        const SurrogateFit fit = fit_weighted_ridge(design, lambda);
        const auto gd = oracles::ridge_gradient_descent(sys.rows_as_double(), sys.targets,
                                                        sys.weights, lambda);
        for (std::size_t a = 0; a < d; ++a) {
            REQUIRE(std::abs(fit.weights()[a] - gd.weights[a]) < 1e-6);
        }
        REQUIRE(std::abs(fit.intercept() - gd.intercept) < 1e-6);
    }
}

TEST_CASE("property: weight norm shrinks monotonically in lambda") {
    std::mt19937_64 rng(25);
    for (int trial = 0; trial < 50; ++trial) {
        const RandomSystem sys = make_system(rng, 14, 4, true);
        const auto design = DesignMatrix::make(sys.rows, sys.targets, sys.weights);
        double previous_norm = std::numeric_limits<double>::infinity();
        for (double lambda : {0.0, 0.001, 0.01, 0.1, 1.0, 10.0}) {
            const SurrogateFit fit = fit_weighted_ridge(design, lambda);
            double norm = 0.0;
            for (double w : fit.weights()) norm += w * w;
            CHECK(norm <= previous_norm + 1e-12);
            previous_norm = norm;
        }
    }
}

TEST_CASE("property: scaling all weights and lambda together leaves the fit unchanged") {
    std::mt19937_64 rng(26);
    for (int trial = 0; trial < 50; ++trial) {
        const RandomSystem sys = make_system(rng, 12, 3, true);
        const double c = 0.25 + 4.0 * oracles::unit_uniform(rng);
        std::vector<double> scaled = sys.weights;
        for (double& w : scaled) w *= c;

        const auto base = DesignMatrix::make(sys.rows, sys.targets, sys.weights);
        const auto rescaled = DesignMatrix::make(sys.rows, sys.targets, scaled);

        // lambda scaled along with the weights
        const SurrogateFit f1 = fit_weighted_ridge(base, 0.05);
        const SurrogateFit f2 = fit_weighted_ridge(rescaled, 0.05 * c);
        for (std::size_t a = 0; a < f1.weights().size(); ++a) {
            CHECK(f1.weights()[a] == doctest::Approx(f2.weights()[a]).epsilon(1e-9));
        }
        CHECK(f1.intercept() == doctest::Approx(f2.intercept()).epsilon(1e-9));

        // lambda = 0: unconditionally invariant
        const SurrogateFit g1 = fit_weighted_ridge(base, 0.0);
        const SurrogateFit g2 = fit_weighted_ridge(rescaled, 0.0);
        for (std::size_t a = 0; a < g1.weights().size(); ++a) {
            CHECK(g1.weights()[a] == doctest::Approx(g2.weights()[a]).epsilon(1e-9));
        }
        CHECK(g1.intercept() == doctest::Approx(g2.intercept()).epsilon(1e-9));
    }
}

TEST_CASE("property: coordinate perturbations never decrease the objective") {
    std::mt19937_64 rng(27);
    for (int trial = 0; trial < 30; ++trial) {
        const double lambda = trial % 2 == 0 ? 0.01 : 0.5;
        const RandomSystem sys = make_system(rng, 12, 4, false);
        const auto design = DesignMatrix::make(sys.rows, sys.targets, sys.weights);
        const SurrogateFit fit = fit_weighted_ridge(design, lambda);
        const auto z = sys.rows_as_double();

        const double at_optimum = oracles::ridge_objective(z, sys.targets, sys.weights, lambda,
                                                           fit.weights(), fit.intercept());
        for (std::size_t coord = 0; coord <= fit.weights().size(); ++coord) {
            for (double delta : {-1e-3, 1e-3}) {
                std::vector<double> w = fit.weights();
                double b = fit.intercept();
                if (coord < w.size()) {
                    w[coord] += delta;
                } else {
                    b += delta;
                }
                const double perturbed =
                    oracles::ridge_objective(z, sys.targets, sys.weights, lambda, w, b);
                CHECK(perturbed >= at_optimum - 1e-12);
            }
        }
    }
}

TEST_CASE("weighted_sse is the weighted residual sum at the optimum") {
    const auto design = DesignMatrix::make({{1, 0}, {0, 1}, {1, 1}, {0, 0}},
                                           {0.8, 0.4, 0.9, 0.3}, {1.0, 1.0, 0.5, 2.0});
    const SurrogateFit fit = fit_weighted_ridge(design, 0.01);
    double expected = 0.0;
    const double w0 = fit.weights()[0];
    const double w1 = fit.weights()[1];
    const double b = fit.intercept();
    const double targets[] = {0.8, 0.4, 0.9, 0.3};
    const double preds[] = {b + w0, b + w1, b + w0 + w1, b};
    const double weights[] = {1.0, 1.0, 0.5, 2.0};
    for (int i = 0; i < 4; ++i) {
        expected += weights[i] * (targets[i] - preds[i]) * (targets[i] - preds[i]);
    }
    CHECK(fit.weighted_sse() == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("explain end-to-end: planted keyword becomes the top attribution") {
    MockClassifier classifier({{"dreadful", {2.0, 0.0}}});
    MockLlm llm({"texture", "rhythm", "outline"},
                {{"positive", {"wonderful", "superb"}}, {"negative", {"grim"}}});
    MockEmbedder embedder;

    const std::string text = "the film pace was dreadful and the score dull";
    const auto probs = classifier.predict({text});
    const Instance instance = Instance::create("e2e", text, probs[0]);
    REQUIRE(instance.predicted_label() == 0);

    PipelineConfig config;
    config.sampling.n_samples = 12;
    config.sampling.seed = 3;
    config.prompt = PromptSpec::make("Binary movie-review sentiment.", {"negative", "positive"});

    GenerationStats stats;
    const Explanation explanation =
        explain(instance, classifier, llm, &embedder, config, &stats);
    CHECK(explanation.method() == "lime-llm");
    CHECK(explanation.seed() == 3);
    CHECK(explanation.tokens()[explanation.top_index()] == "dreadful");
    // one row per admitted sample plus the appended original
    CHECK(explanation.diagnostics().sample_count == 13);
    CHECK(explanation.diagnostics().dropped == 0);
    CHECK(stats.llm_calls == 1);

    // fixed seed + deterministic backends: byte-identical reruns
    const Explanation again = explain(instance, classifier, llm, &embedder, config);
    CHECK(explanation_to_jsonl(explanation) == explanation_to_jsonl(again));
}

TEST_CASE("build_design embeds the whole neighborhood in one request") {
    struct CountingEmbedder : EmbeddingBackend {
        MockEmbedder inner;
        std::size_t calls = 0;
        std::size_t last_batch = 0;
        std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override {
            ++calls;
            last_batch = texts.size();
            return inner.embed(texts);
        }
    } embedder;
    MockClassifier classifier({{"dreadful", {2.0, 0.0}}});
    MockLlm llm({"texture", "rhythm"}, {{"positive", {"nice"}}, {"negative", {"grim"}}});

    const std::string text = "the film pace was dreadful and the score dull";
    const auto probs = classifier.predict({text});
    const Instance instance = Instance::create("batch", text, probs[0]);
    const SaliencyProfile saliency = occlusion_saliency(instance, classifier);
    SamplingConfig sampling;
    sampling.n_samples = 10;
    sampling.seed = 2;
    const auto hypotheses = build_hypotheses(instance, sampling, saliency);
    const auto generated =
        generate_neighborhood(instance, hypotheses,
                              PromptSpec::make("Sentiment.", {"negative", "positive"}), llm,
                              classifier, GenerationPolicy{}, saliency.top_index());

    const DesignMatrix design =
        build_design(generated.neighborhood, KernelMode::Hybrid, &embedder);
    CHECK(embedder.calls == 1);
    CHECK(embedder.last_batch == generated.neighborhood.samples().size() + 1);
    CHECK(design.row_count() == generated.neighborhood.samples().size() + 1);
    // the appended original row: all-ones mask, weight 1, target p(pred|x)
    const auto& last_row = design.rows().back();
    for (std::uint8_t bit : last_row) CHECK(bit == 1);
    CHECK(design.weights().back() == 1.0);
    CHECK(design.targets().back() ==
          instance.probs()[instance.predicted_label()]);

    // BowOnly never touches the embedder
    embedder.calls = 0;
    build_design(generated.neighborhood, KernelMode::BowOnly, nullptr);
    CHECK(embedder.calls == 0);
}

TEST_CASE("explain end-to-end: constant classifier yields near-zero scores") {
    MockClassifier classifier({{"unmatched-token", {1.0, 0.0}}});
    MockLlm llm({"texture", "rhythm"}, {{"negative", {"grim"}}, {"positive", {"nice"}}});
    MockEmbedder embedder;

    const std::string text = "all these words carry no classifier weight";
    const auto probs = classifier.predict({text});
    const Instance instance = Instance::create("flat", text, probs[0]);

    PipelineConfig config;
    config.sampling.n_samples = 10;
    config.sampling.seed = 5;
    config.lambda = 0.01;
    config.prompt = PromptSpec::make("Binary movie-review sentiment.", {"negative", "positive"});

    const Explanation explanation = explain(instance, classifier, llm, &embedder, config);
    for (double score : explanation.scores()) {
        CHECK(std::abs(score) <= 1e-6);
    }
}

TEST_CASE("explain annotates the failing stage") {
    MockClassifier classifier({{"dreadful", {2.0, 0.0}}});
    MockLlm llm({"texture"}, {{"positive", {"nice"}}, {"negative", {"grim"}}});
    MockEmbedder embedder;
    const auto probs = classifier.predict({"just dreadful"});
    // d=2 admits only two masks; 12 hypotheses cannot exist
    const Instance tiny = Instance::create("tiny", "just dreadful", probs[0]);
    PipelineConfig config;
    config.sampling.n_samples = 12;
    config.prompt = PromptSpec::make("Sentiment.", {"negative", "positive"});
    try {
        explain(tiny, classifier, llm, &embedder, config);
        FAIL("expected ExhaustedMaskSpaceError");
    } catch (const ExhaustedMaskSpaceError& e) {
        CHECK(std::string(e.what()).find("explain[sampling]") != std::string::npos);
    }
}

TEST_CASE("singular lambda=0 systems raise SingularSystemError") {
    // Two identical columns make the normal matrix rank-deficient.
    const auto design = DesignMatrix::make({{1, 1}, {1, 1}, {0, 0}}, {0.2, 0.4, 0.6},
                                           {1.0, 1.0, 1.0});
    CHECK_THROWS_AS(fit_weighted_ridge(design, 0.0), SingularSystemError);
    CHECK_NOTHROW(fit_weighted_ridge(design, 0.01));
    CHECK_THROWS_AS(fit_weighted_ridge(design, std::nan("")), NonFiniteInputError);
}
