#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "limellm/errors.hpp"

namespace limellm {

// One interpretable unit: a maximal run of non-whitespace characters.
struct Token {
    std::string surface;
    std::size_t index = 0;

    bool operator==(const Token&) const = default;
};

// Per-token keep/mask bits. Bit 1 = anchor (kept verbatim), bit 0 = masked slot.
class BinaryMask {
public:
    explicit BinaryMask(std::vector<std::uint8_t> bits);

    // Parses a string of '0'/'1' characters, e.g. "1011".
    static BinaryMask from_string(const std::string& bits);

    std::size_t size() const noexcept { return bits_.size(); }
    bool kept(std::size_t i) const { return bits_.at(i) == 1; }
    bool masked(std::size_t i) const { return bits_.at(i) == 0; }
    std::size_t kept_count() const noexcept;
    std::size_t masked_count() const noexcept { return size() - kept_count(); }
    const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }
    std::string to_string() const;

    bool operator==(const BinaryMask&) const = default;

private:
    std::vector<std::uint8_t> bits_;
};

enum class Strategy {
    NeutralInfill,   // fill slots while preserving the predicted label
    BoundaryInfill,  // fill slots to push the prediction toward target_label
};

const char* strategy_name(Strategy s);

// A mask paired with an infill strategy and its target label.
class PerturbationHypothesis {
public:
    // predicted_label is the instance's predicted class; it pins the
    // target-label consistency rules at construction time.
    static PerturbationHypothesis make(BinaryMask mask, Strategy strategy,
                                       std::size_t target_label,
                                       std::size_t predicted_label);

    const BinaryMask& mask() const noexcept { return mask_; }
    Strategy strategy() const noexcept { return strategy_; }
    std::size_t target_label() const noexcept { return target_label_; }

    bool operator==(const PerturbationHypothesis&) const = default;

private:
    PerturbationHypothesis(BinaryMask mask, Strategy strategy, std::size_t target_label)
        : mask_(std::move(mask)), strategy_(strategy), target_label_(target_label) {}

    BinaryMask mask_;
    Strategy strategy_;
    std::size_t target_label_;
};

enum class SampleOrigin {
    Generated,          // produced by the LLM infiller
    DeletionBaseline,   // produced by token deletion (standard-LIME path)
};

// One neighborhood record: hypothesis, realized text, classifier output.
class PerturbationSample {
public:
    static PerturbationSample make(PerturbationHypothesis hypothesis, std::string text,
                                   bool anchor_verified, std::vector<double> probs,
                                   double proximity, SampleOrigin origin);

    const PerturbationHypothesis& hypothesis() const noexcept { return hypothesis_; }
    const BinaryMask& mask() const noexcept { return hypothesis_.mask(); }
    const std::string& text() const noexcept { return text_; }
    bool anchor_verified() const noexcept { return anchor_verified_; }
    const std::vector<double>& probs() const noexcept { return probs_; }
    double proximity() const noexcept { return proximity_; }
    SampleOrigin origin() const noexcept { return origin_; }

private:
    PerturbationSample(PerturbationHypothesis hypothesis, std::string text, bool anchor_verified,
                       std::vector<double> probs, double proximity, SampleOrigin origin)
        : hypothesis_(std::move(hypothesis)), text_(std::move(text)),
          anchor_verified_(anchor_verified), probs_(std::move(probs)), proximity_(proximity),
          origin_(origin) {}

    PerturbationHypothesis hypothesis_;
    std::string text_;
    bool anchor_verified_;
    std::vector<double> probs_;
    double proximity_;
    SampleOrigin origin_;
};

// Human-annotated importance bits (1 = marked important).
class BinaryRationale {
public:
    explicit BinaryRationale(std::vector<std::uint8_t> bits);

    std::size_t size() const noexcept { return bits_.size(); }
    bool positive(std::size_t i) const { return bits_.at(i) == 1; }
    std::size_t positive_count() const noexcept;
    const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }

    bool operator==(const BinaryRationale&) const = default;

private:
    std::vector<std::uint8_t> bits_;
};

// One text to explain, with the classifier's verdict on it.
class Instance {
public:
    // Tokenizes text, validates probs (sums to 1, C >= 2) and the optional
    // rationale length. predicted_label is derived as argmax(probs).
    static Instance create(std::string id, std::string text, std::vector<double> probs,
                           std::optional<BinaryRationale> rationale = std::nullopt);

    const std::string& id() const noexcept { return id_; }
    const std::string& text() const noexcept { return text_; }
    // Token surfaces joined by single spaces; the form every derived text uses.
    const std::string& canonical_text() const noexcept { return canonical_text_; }
    const std::vector<Token>& tokens() const noexcept { return tokens_; }
    std::size_t token_count() const noexcept { return tokens_.size(); }
    std::size_t predicted_label() const noexcept { return predicted_label_; }
    std::size_t class_count() const noexcept { return probs_.size(); }
    const std::vector<double>& probs() const noexcept { return probs_; }
    const std::optional<BinaryRationale>& rationale() const noexcept { return rationale_; }

private:
    Instance() = default;

    std::string id_;
    std::string text_;
    std::string canonical_text_;
    std::vector<Token> tokens_;
    std::size_t predicted_label_ = 0;
    std::vector<double> probs_;
    std::optional<BinaryRationale> rationale_;
};

// The sample set used to fit one local surrogate.
class Neighborhood {
public:
    // Enforces: every mask length matches the instance token count, no two
    // samples share a mask, and every Generated sample is anchor-verified.
    static Neighborhood make(Instance instance, std::vector<PerturbationSample> samples,
                             std::size_t dropped);

    const Instance& instance() const noexcept { return instance_; }
    const std::vector<PerturbationSample>& samples() const noexcept { return samples_; }
    std::size_t dropped() const noexcept { return dropped_; }

private:
    Neighborhood(Instance instance, std::vector<PerturbationSample> samples, std::size_t dropped)
        : instance_(std::move(instance)), samples_(std::move(samples)), dropped_(dropped) {}

    Instance instance_;
    std::vector<PerturbationSample> samples_;
    std::size_t dropped_;
};

// Fitted surrogate coefficients plus fit diagnostics.
class SurrogateFit {
public:
    static SurrogateFit make(std::vector<double> weights, double intercept, double lambda,
                             double weighted_sse, std::size_t sample_count);

    const std::vector<double>& weights() const noexcept { return weights_; }
    double intercept() const noexcept { return intercept_; }
    double lambda() const noexcept { return lambda_; }
    double weighted_sse() const noexcept { return weighted_sse_; }
    std::size_t sample_count() const noexcept { return sample_count_; }

private:
    SurrogateFit() = default;

    std::vector<double> weights_;
    double intercept_ = 0.0;
    double lambda_ = 0.0;
    double weighted_sse_ = 0.0;
    std::size_t sample_count_ = 0;
};

// Fit diagnostics carried on an explanation (the JSONL "diagnostics" object).
struct FitDiagnostics {
    double weighted_sse = 0.0;
    std::size_t sample_count = 0;
    std::size_t dropped = 0;

    bool operator==(const FitDiagnostics&) const = default;
};

// Signed per-token attributions toward the instance's predicted class.
class Explanation {
public:
    static Explanation make(std::string instance_id, std::vector<double> scores,
                            std::vector<std::string> tokens, std::string method,
                            std::int64_t seed, FitDiagnostics diagnostics);

    const std::string& instance_id() const noexcept { return instance_id_; }
    const std::vector<double>& scores() const noexcept { return scores_; }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }
    const std::string& method() const noexcept { return method_; }
    std::int64_t seed() const noexcept { return seed_; }
    const FitDiagnostics& diagnostics() const noexcept { return diagnostics_; }

    // Token indices ordered by descending score; ties broken by ascending index.
    std::vector<std::size_t> ranked_indices() const;
    std::size_t top_index() const { return ranked_indices().front(); }

private:
    Explanation() = default;

    std::string instance_id_;
    std::vector<double> scores_;
    std::vector<std::string> tokens_;
    std::string method_;
    std::int64_t seed_ = 0;
    FitDiagnostics diagnostics_;
};

// Ranks score indices by descending value, ties by ascending index.
std::vector<std::size_t> ranked_indices(const std::vector<double>& scores);

} // namespace limellm
