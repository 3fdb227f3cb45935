#include "limellm/surrogate.hpp"

#include <cmath>

#include "limellm/tokenization.hpp"

namespace limellm {
namespace {

// Solves M x = rhs in place via Gaussian elimination with partial pivoting.
// Throws SingularSystemError when a pivot vanishes.
std::vector<double> solve_dense(std::vector<std::vector<double>> m, std::vector<double> rhs) {
    const std::size_t p = rhs.size();
    for (std::size_t col = 0; col < p; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < p; ++r) {
            if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
        }
        if (std::abs(m[pivot][col]) < 1e-12) {
            throw SingularSystemError("fit_weighted_ridge: singular normal equations (column " +
                                      std::to_string(col) + ")");
        }
        std::swap(m[col], m[pivot]);
        std::swap(rhs[col], rhs[pivot]);
        for (std::size_t r = col + 1; r < p; ++r) {
            const double factor = m[r][col] / m[col][col];
            if (factor == 0.0) continue;
            for (std::size_t c = col; c < p; ++c) m[r][c] -= factor * m[col][c];
            rhs[r] -= factor * rhs[col];
        }
    }
    std::vector<double> x(p, 0.0);
    for (std::size_t row = p; row-- > 0;) {
        double acc = rhs[row];
        for (std::size_t c = row + 1; c < p; ++c) acc -= m[row][c] * x[c];
        x[row] = acc / m[row][row];
    }
    return x;
}

template <typename Fn>
auto run_stage(const char* stage, Fn&& fn) {
    const auto annotate = [stage](const Error& e) {
        return "explain[" + std::string(stage) + "]: " + e.what();
    };
    try {
        return fn();
    } catch (const BackendError& e) {
        throw BackendError(annotate(e), e.status(), e.body_excerpt());
    } catch (const InsufficientNeighborhoodError& e) {
        throw InsufficientNeighborhoodError(annotate(e));
    } catch (const ExhaustedMaskSpaceError& e) {
        throw ExhaustedMaskSpaceError(annotate(e));
    } catch (const SingularSystemError& e) {
        throw SingularSystemError(annotate(e));
    } catch (const Error& e) {
        throw Error(annotate(e));
    }
}

} // namespace

DesignMatrix DesignMatrix::make(std::vector<std::vector<std::uint8_t>> rows,
                                std::vector<double> targets, std::vector<double> weights) {
    if (rows.empty()) throw InvariantError("DesignMatrix: must have at least one row");
    if (targets.size() != rows.size() || weights.size() != rows.size()) {
        throw LengthMismatchError("DesignMatrix: rows/targets/weights size mismatch");
    }
    const std::size_t d = rows[0].size();
    if (d == 0) throw InvariantError("DesignMatrix: rows must have at least one feature");
    for (const auto& row : rows) {
        if (row.size() != d) throw LengthMismatchError("DesignMatrix: ragged rows");
        for (std::uint8_t bit : row) {
            if (bit != 0 && bit != 1) throw InvariantError("DesignMatrix: rows must be binary");
        }
    }
    bool any_positive = false;
    for (double w : weights) {
        if (!std::isfinite(w)) throw NonFiniteInputError("DesignMatrix: non-finite weight");
        if (w < 0.0) throw InvariantError("DesignMatrix: weights must be >= 0");
        if (w > 0.0) any_positive = true;
    }
    if (!any_positive) throw InvariantError("DesignMatrix: at least one weight must be > 0");
    for (double y : targets) {
        if (!std::isfinite(y)) throw NonFiniteInputError("DesignMatrix: non-finite target");
        if (y < 0.0 || y > 1.0) throw InvariantError("DesignMatrix: targets must lie in [0,1]");
    }
    DesignMatrix dm;
    dm.rows_ = std::move(rows);
    dm.targets_ = std::move(targets);
    dm.weights_ = std::move(weights);
    return dm;
}

DesignMatrix build_design(const Neighborhood& neighborhood, KernelMode mode,
                          EmbeddingBackend* embedder, double bow_weight) {
    const auto& samples = neighborhood.samples();
    if (samples.empty()) throw InvariantError("build_design: empty neighborhood");
    const Instance& instance = neighborhood.instance();
    const std::size_t d = instance.token_count();
    const std::size_t label = instance.predicted_label();

    // One batched embedding request covering the original and every sample.
    std::vector<double> emb_cos(samples.size(), 0.0);
    if (mode != KernelMode::BowOnly) {
        if (embedder == nullptr) {
            throw ConfigError("build_design: embedding backend required for kernel mode " +
                              std::string(kernel_mode_name(mode)));
        }
        std::vector<std::string> texts;
        texts.reserve(samples.size() + 1);
        texts.push_back(instance.canonical_text());
        for (const auto& s : samples) texts.push_back(s.text());
        const auto vectors = embedder->embed(texts);
        if (vectors.size() != texts.size()) {
            throw BackendError("build_design: embedder returned " +
                               std::to_string(vectors.size()) + " vectors for " +
                               std::to_string(texts.size()) + " texts");
        }
        for (std::size_t i = 0; i < samples.size(); ++i) {
            emb_cos[i] = dense_cosine(vectors[0], vectors[i + 1]);
        }
    }

    std::vector<std::vector<std::uint8_t>> rows;
    std::vector<double> targets;
    std::vector<double> weights;
    rows.reserve(samples.size() + 1);
    targets.reserve(samples.size() + 1);
    weights.reserve(samples.size() + 1);

    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        rows.push_back(s.mask().bits());
        targets.push_back(s.probs().at(label));
        double bow = 0.0;
        if (mode != KernelMode::EmbeddingOnly) {
            bow = bow_cosine(instance.tokens(), tokenize(s.text()));
        }
        weights.push_back(blend_proximity(bow, emb_cos[i], mode, bow_weight));
    }

    // The original instance anchors the fit: all-ones mask, weight 1.
    rows.emplace_back(d, 1);
    targets.push_back(instance.probs()[label]);
    weights.push_back(1.0);

    return DesignMatrix::make(std::move(rows), std::move(targets), std::move(weights));
}

DesignMatrix build_design_deletion(const Instance& instance, const std::vector<BinaryMask>& masks,
                                   const std::vector<std::string>& texts,
                                   const std::vector<std::vector<double>>& probs, double sigma) {
    if (masks.size() != texts.size() || masks.size() != probs.size()) {
        throw LengthMismatchError("build_design_deletion: masks/texts/probs size mismatch");
    }
    const std::size_t d = instance.token_count();
    const std::size_t label = instance.predicted_label();

    std::vector<std::vector<std::uint8_t>> rows;
    std::vector<double> targets;
    std::vector<double> weights;
    rows.reserve(masks.size() + 1);
    targets.reserve(masks.size() + 1);
    weights.reserve(masks.size() + 1);

    for (std::size_t i = 0; i < masks.size(); ++i) {
        rows.push_back(masks[i].bits());
        targets.push_back(probs[i].at(label));
        const double distance = 1.0 - bow_cosine(instance.tokens(), tokenize(texts[i]));
        weights.push_back(exponential_kernel(distance, sigma));
    }

    rows.emplace_back(d, 1);
    targets.push_back(instance.probs()[label]);
    weights.push_back(exponential_kernel(0.0, sigma));

    return DesignMatrix::make(std::move(rows), std::move(targets), std::move(weights));
}

SurrogateFit fit_weighted_ridge(const DesignMatrix& design, double lambda) {
    if (design.row_count() < 2) {
        throw InvariantError("fit_weighted_ridge: need at least 2 rows");
    }
    if (!std::isfinite(lambda)) throw NonFiniteInputError("fit_weighted_ridge: non-finite lambda");
    if (lambda < 0.0) throw ConfigError("fit_weighted_ridge: lambda must be >= 0");

    const std::size_t n = design.row_count();
    const std::size_t d = design.feature_count();
    const std::size_t p = d + 1;  // intercept column appended last

    std::vector<std::vector<double>> m(p, std::vector<double>(p, 0.0));
    std::vector<double> rhs(p, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double w = design.weights()[i];
        if (w == 0.0) continue;
        const auto& row = design.rows()[i];
        const double y = design.targets()[i];
        for (std::size_t a = 0; a < p; ++a) {
            const double va = a < d ? static_cast<double>(row[a]) : 1.0;
            if (va == 0.0) continue;
            rhs[a] += w * va * y;
            for (std::size_t b = a; b < p; ++b) {
                const double vb = b < d ? static_cast<double>(row[b]) : 1.0;
                m[a][b] += w * va * vb;
            }
        }
    }
    for (std::size_t a = 0; a < p; ++a) {
        for (std::size_t b = 0; b < a; ++b) m[a][b] = m[b][a];
    }
    for (std::size_t a = 0; a < d; ++a) m[a][a] += lambda;  // intercept unregularized

    const std::vector<double> solution = solve_dense(std::move(m), std::move(rhs));

    std::vector<double> fitted_weights(solution.begin(), solution.begin() + static_cast<std::ptrdiff_t>(d));
    const double intercept = solution[d];

    double weighted_sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double pred = intercept;
        const auto& row = design.rows()[i];
        for (std::size_t a = 0; a < d; ++a) {
            if (row[a]) pred += fitted_weights[a];
        }
        const double r = design.targets()[i] - pred;
        weighted_sse += design.weights()[i] * r * r;
    }
    // Guard tiny negative results of cancellation.
    weighted_sse = std::max(weighted_sse, 0.0);

    return SurrogateFit::make(std::move(fitted_weights), intercept, lambda, weighted_sse, n);
}

Explanation explain_from_neighborhood(const Neighborhood& neighborhood, KernelMode mode,
                                      EmbeddingBackend* embedder, double lambda,
                                      double bow_weight, const std::string& method,
                                      std::int64_t seed) {
    const DesignMatrix design = run_stage("design", [&] {
        return build_design(neighborhood, mode, embedder, bow_weight);
    });
    const SurrogateFit fit = run_stage("fit", [&] {
        return fit_weighted_ridge(design, lambda);
    });

    const Instance& instance = neighborhood.instance();
    std::vector<std::string> surfaces;
    surfaces.reserve(instance.token_count());
    for (const Token& t : instance.tokens()) surfaces.push_back(t.surface);

    FitDiagnostics diagnostics{fit.weighted_sse(), fit.sample_count(), neighborhood.dropped()};
    return Explanation::make(instance.id(), fit.weights(), std::move(surfaces), method, seed,
                             diagnostics);
}

Explanation explain(const Instance& instance, ClassifierBackend& classifier, LlmBackend& llm,
                    EmbeddingBackend* embedder, const PipelineConfig& config,
                    GenerationStats* stats_out) {
    config.sampling.validate();
    config.generation.validate();

    const SaliencyProfile saliency = run_stage("saliency", [&] {
        return occlusion_saliency(instance, classifier);
    });
    const auto hypotheses = run_stage("sampling", [&] {
        return build_hypotheses(instance, config.sampling, saliency);
    });
    GenerationResult generated = run_stage("generation", [&] {
        return generate_neighborhood(instance, hypotheses, config.prompt, llm, classifier,
                                     config.generation, saliency.top_index(),
                                     config.sampling.seed);
    });
    if (stats_out != nullptr) *stats_out = generated.stats;

    return explain_from_neighborhood(generated.neighborhood, config.kernel_mode, embedder,
                                     config.lambda, config.hybrid_bow_weight, config.method,
                                     config.sampling.seed);
}

} // namespace limellm
