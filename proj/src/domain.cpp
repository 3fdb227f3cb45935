#include "limellm/domain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "limellm/tokenization.hpp"

namespace limellm {
namespace {

constexpr double kProbSumTolerance = 1e-6;

void validate_probs(const std::vector<double>& probs, const char* context) {
    if (probs.size() < 2) {
        throw InvariantError(std::string(context) + ": class count must be >= 2");
    }
    double sum = 0.0;
    for (double p : probs) {
        if (!std::isfinite(p) || p < 0.0) {
            throw InvariantError(std::string(context) + ": probabilities must be finite and >= 0");
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > kProbSumTolerance) {
        throw InvariantError(std::string(context) + ": probabilities sum to " +
                             std::to_string(sum) + ", expected 1.0 +- 1e-6");
    }
}

std::vector<std::uint8_t> validate_bits(std::vector<std::uint8_t> bits, const char* context) {
    if (bits.empty()) {
        throw InvariantError(std::string(context) + ": bit vector must be non-empty");
    }
    for (std::uint8_t b : bits) {
        if (b != 0 && b != 1) {
            throw InvariantError(std::string(context) + ": bits must be 0 or 1");
        }
    }
    return bits;
}

} // namespace

BinaryMask::BinaryMask(std::vector<std::uint8_t> bits)
    : bits_(validate_bits(std::move(bits), "BinaryMask")) {}

BinaryMask BinaryMask::from_string(const std::string& bits) {
    std::vector<std::uint8_t> out;
    out.reserve(bits.size());
    for (char c : bits) {
        if (c != '0' && c != '1') {
            throw InvariantError("BinaryMask::from_string: expected only '0'/'1'");
        }
        out.push_back(c == '1' ? 1 : 0);
    }
    return BinaryMask(std::move(out));
}

std::size_t BinaryMask::kept_count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

std::string BinaryMask::to_string() const {
    std::string out(bits_.size(), '0');
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        if (bits_[i]) out[i] = '1';
    }
    return out;
}

const char* strategy_name(Strategy s) {
    return s == Strategy::NeutralInfill ? "neutral" : "boundary";
}

PerturbationHypothesis PerturbationHypothesis::make(BinaryMask mask, Strategy strategy,
                                                    std::size_t target_label,
                                                    std::size_t predicted_label) {
    const std::size_t kept = mask.kept_count();
    if (kept == 0 || kept == mask.size()) {
        throw InvariantError("PerturbationHypothesis: mask must have at least one 0 and one 1 bit");
    }
    if (strategy == Strategy::NeutralInfill && target_label != predicted_label) {
        throw InvariantError("PerturbationHypothesis: neutral infill must target the predicted label");
    }
    if (strategy == Strategy::BoundaryInfill && target_label == predicted_label) {
        throw InvariantError("PerturbationHypothesis: boundary infill must target a counterfactual label");
    }
    return PerturbationHypothesis(std::move(mask), strategy, target_label);
}

PerturbationSample PerturbationSample::make(PerturbationHypothesis hypothesis, std::string text,
                                            bool anchor_verified, std::vector<double> probs,
                                            double proximity, SampleOrigin origin) {
    validate_probs(probs, "PerturbationSample");
    if (!std::isfinite(proximity) || proximity < 0.0 || proximity > 1.0) {
        throw InvariantError("PerturbationSample: proximity must lie in [0,1]");
    }
    return PerturbationSample(std::move(hypothesis), std::move(text), anchor_verified,
                              std::move(probs), proximity, origin);
}

BinaryRationale::BinaryRationale(std::vector<std::uint8_t> bits)
    : bits_(validate_bits(std::move(bits), "BinaryRationale")) {}

std::size_t BinaryRationale::positive_count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

Instance Instance::create(std::string id, std::string text, std::vector<double> probs,
                          std::optional<BinaryRationale> rationale) {
    validate_probs(probs, "Instance");
    Instance inst;
    inst.tokens_ = tokenize(text);
    inst.id_ = std::move(id);
    inst.text_ = std::move(text);
    inst.canonical_text_ = detokenize(inst.tokens_);
    inst.predicted_label_ = static_cast<std::size_t>(
        std::max_element(probs.begin(), probs.end()) - probs.begin());
    inst.probs_ = std::move(probs);
    if (rationale.has_value() && rationale->size() != inst.tokens_.size()) {
        throw LengthMismatchError("Instance: rationale has " + std::to_string(rationale->size()) +
                                  " bits, expected " + std::to_string(inst.tokens_.size()));
    }
    inst.rationale_ = std::move(rationale);
    return inst;
}

Neighborhood Neighborhood::make(Instance instance, std::vector<PerturbationSample> samples,
                                std::size_t dropped) {
    std::set<std::vector<std::uint8_t>> seen;
    for (const PerturbationSample& s : samples) {
        if (s.mask().size() != instance.token_count()) {
            throw LengthMismatchError("Neighborhood: sample mask length " +
                                      std::to_string(s.mask().size()) + " != token count " +
                                      std::to_string(instance.token_count()));
        }
        if (!seen.insert(s.mask().bits()).second) {
            throw InvariantError("Neighborhood: duplicate mask " + s.mask().to_string());
        }
        if (s.origin() == SampleOrigin::Generated && !s.anchor_verified()) {
            throw InvariantError("Neighborhood: generated sample admitted without anchor verification");
        }
    }
    return Neighborhood(std::move(instance), std::move(samples), dropped);
}

SurrogateFit SurrogateFit::make(std::vector<double> weights, double intercept, double lambda,
                                double weighted_sse, std::size_t sample_count) {
    for (double w : weights) {
        if (!std::isfinite(w)) throw InvariantError("SurrogateFit: weights must be finite");
    }
    if (!std::isfinite(intercept)) throw InvariantError("SurrogateFit: intercept must be finite");
    if (!std::isfinite(lambda) || lambda < 0.0) {
        throw InvariantError("SurrogateFit: lambda must be finite and >= 0");
    }
    if (!std::isfinite(weighted_sse) || weighted_sse < 0.0) {
        throw InvariantError("SurrogateFit: weighted_sse must be finite and >= 0");
    }
    SurrogateFit f;
    f.weights_ = std::move(weights);
    f.intercept_ = intercept;
    f.lambda_ = lambda;
    f.weighted_sse_ = weighted_sse;
    f.sample_count_ = sample_count;
    return f;
}

Explanation Explanation::make(std::string instance_id, std::vector<double> scores,
                              std::vector<std::string> tokens, std::string method,
                              std::int64_t seed, FitDiagnostics diagnostics) {
    if (scores.size() != tokens.size()) {
        throw LengthMismatchError("Explanation: scores length " + std::to_string(scores.size()) +
                                  " != token count " + std::to_string(tokens.size()));
    }
    if (scores.empty()) {
        throw InvariantError("Explanation: scores must be non-empty");
    }
    for (double s : scores) {
        if (!std::isfinite(s)) throw InvariantError("Explanation: scores must be finite");
    }
    Explanation e;
    e.instance_id_ = std::move(instance_id);
    e.scores_ = std::move(scores);
    e.tokens_ = std::move(tokens);
    e.method_ = std::move(method);
    e.seed_ = seed;
    e.diagnostics_ = diagnostics;
    return e;
}

std::vector<std::size_t> Explanation::ranked_indices() const {
    return limellm::ranked_indices(scores_);
}

std::vector<std::size_t> ranked_indices(const std::vector<double>& scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });
    return order;
}

} // namespace limellm
