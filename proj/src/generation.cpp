#include "limellm/generation.hpp"

#include <algorithm>
#include <chrono>
#include <set>

#include "limellm/tokenization.hpp"

namespace limellm {
namespace {

// Replaces every occurrence of placeholder in text.
void replace_all(std::string& text, const std::string& placeholder, const std::string& value) {
    std::size_t pos = 0;
    while ((pos = text.find(placeholder, pos)) != std::string::npos) {
        text.replace(pos, placeholder.size(), value);
        pos += value.size();
    }
}

std::string directive_for(const PerturbationHypothesis& hypothesis, const PromptSpec& spec,
                          const Instance& instance,
                          std::optional<std::size_t> top_saliency_index) {
    const std::string& label = spec.label_names.at(hypothesis.target_label());
    if (hypothesis.strategy() == Strategy::NeutralInfill) {
        return "keep the label \"" + label + "\"";
    }
    std::string directive = "change the label to \"" + label + "\"";
    if (top_saliency_index.has_value() && hypothesis.mask().masked(*top_saliency_index)) {
        const std::string& word = instance.tokens()[*top_saliency_index].surface;
        directive += "; do not use \"" + word + "\" or any synonym of it";
    }
    return directive;
}

} // namespace

const std::string& PromptSpec::default_template() {
    static const std::string kTemplate =
        "You fill slots in sentences. Task context: {{dataset_description}}\n"
        "\n"
        "Original sentence:\n"
        "{{original_text}}\n"
        "\n"
        "Rewrite the original sentence once per numbered hypothesis below. Replace each\n"
        "[SLOT_k] placeholder with replacement text; every other word is an anchor and\n"
        "must appear verbatim, in the same order, in your rewrite.\n"
        "{{extra_constraints}}\n"
        "{{hypotheses}}\n"
        "\n"
        "Answer with exactly one line per hypothesis and no other text, in the format:\n"
        "<hypothesis number>: <full rewritten sentence>\n";
    return kTemplate;
}

PromptSpec PromptSpec::make(std::string dataset_description, std::vector<std::string> label_names,
                            std::vector<std::string> negative_constraints,
                            std::string template_version, std::string template_text) {
    if (label_names.empty()) {
        throw ConfigError("PromptSpec: label_names must be non-empty");
    }
    std::set<std::string> seen;
    for (const std::string& name : label_names) {
        if (name.empty()) throw ConfigError("PromptSpec: label names must be non-empty");
        if (!seen.insert(name).second) {
            throw ConfigError("PromptSpec: duplicate label name '" + name + "'");
        }
    }
    PromptSpec spec;
    spec.dataset_description = std::move(dataset_description);
    spec.label_names = std::move(label_names);
    spec.negative_constraints = std::move(negative_constraints);
    spec.template_version = std::move(template_version);
    spec.template_text = template_text.empty() ? default_template() : std::move(template_text);
    return spec;
}

void GenerationPolicy::validate() const {
    if (max_retries < 0) throw ConfigError("generation.max_retries must be >= 0");
    if (min_neighborhood < 2) throw ConfigError("generation.min_neighborhood must be >= 2");
    if (!(temperature >= 0.0)) throw ConfigError("generation.temperature must be >= 0");
}

std::string build_batched_prompt(const Instance& instance,
                                 const std::vector<PerturbationHypothesis>& hypotheses,
                                 const PromptSpec& spec,
                                 std::optional<std::size_t> top_saliency_index) {
    if (hypotheses.empty()) {
        throw InvariantError("build_batched_prompt: hypotheses must be non-empty");
    }
    for (const auto& h : hypotheses) {
        if (h.target_label() >= spec.label_names.size()) {
            throw ConfigError("build_batched_prompt: target label " +
                              std::to_string(h.target_label()) + " has no label name");
        }
    }

    std::string blocks = "Hypotheses:";
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
        const auto& h = hypotheses[i];
        blocks += "\nHypothesis " + std::to_string(i) + " (" +
                  directive_for(h, spec, instance, top_saliency_index) + "):\n" +
                  "Template: " + render_masked_template(instance.tokens(), h.mask());
    }

    std::string constraints;
    for (const std::string& line : spec.negative_constraints) {
        constraints += line + "\n";
    }

    std::string prompt = spec.template_text;
    replace_all(prompt, "{{dataset_description}}", spec.dataset_description);
    replace_all(prompt, "{{original_text}}", instance.canonical_text());
    replace_all(prompt, "{{extra_constraints}}", constraints);
    replace_all(prompt, "{{hypotheses}}", blocks);
    return prompt;
}

ParsedResponse parse_response(const std::string& raw, std::size_t hypothesis_count) {
    if (raw.empty()) {
        throw MalformedResponseError("parse_response: empty response");
    }
    ParsedResponse out;
    std::size_t start = 0;
    while (start <= raw.size()) {
        std::size_t end = raw.find('\n', start);
        if (end == std::string::npos) end = raw.size();
        const std::string_view line(raw.data() + start, end - start);
        start = end + 1;

        std::size_t i = 0;
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        const std::size_t digits_begin = i;
        while (i < line.size() && line[i] >= '0' && line[i] <= '9') ++i;
        if (i == digits_begin || i >= line.size() || line[i] != ':') continue;
        std::size_t index = 0;
        for (std::size_t k = digits_begin; k < i; ++k) {
            index = index * 10 + static_cast<std::size_t>(line[k] - '0');
        }
        ++i;  // skip ':'
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        std::string text(line.substr(i));
        while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
            text.pop_back();
        }
        if (text.empty()) continue;

        if (index >= hypothesis_count) {
            out.diagnostics.push_back("dropped line with out-of-range index " +
                                      std::to_string(index));
            continue;
        }
        if (out.candidates.count(index) != 0) {
            out.diagnostics.push_back("dropped duplicate line for index " + std::to_string(index));
            continue;
        }
        out.candidates.emplace(index, std::move(text));
        if (end == raw.size()) break;
    }
    if (out.candidates.empty()) {
        throw MalformedResponseError("parse_response: no \"i: sentence\" line found");
    }
    return out;
}

GenerationResult generate_neighborhood(const Instance& instance,
                                       const std::vector<PerturbationHypothesis>& hypotheses,
                                       const PromptSpec& spec, LlmBackend& llm,
                                       ClassifierBackend& classifier,
                                       const GenerationPolicy& policy,
                                       std::optional<std::size_t> top_saliency_index,
                                       std::optional<std::int64_t> seed_hint) {
    const auto started = std::chrono::steady_clock::now();
    policy.validate();
    if (hypotheses.empty()) {
        throw InvariantError("generate_neighborhood: hypotheses must be non-empty");
    }
    {
        std::set<std::vector<std::uint8_t>> seen;
        for (const auto& h : hypotheses) {
            if (!seen.insert(h.mask().bits()).second) {
                throw InvariantError("generate_neighborhood: duplicate hypothesis mask " +
                                     h.mask().to_string());
            }
        }
    }

    GenerationStats stats;
    std::vector<std::optional<std::string>> accepted(hypotheses.size());
    std::vector<std::size_t> pending(hypotheses.size());
    for (std::size_t i = 0; i < pending.size(); ++i) pending[i] = i;

    for (int round = 0; round <= policy.max_retries && !pending.empty(); ++round) {
        std::vector<PerturbationHypothesis> subset;
        subset.reserve(pending.size());
        for (std::size_t idx : pending) subset.push_back(hypotheses[idx]);

        const std::string prompt = build_batched_prompt(instance, subset, spec, top_saliency_index);
        const std::string raw = llm.complete(prompt, policy.temperature, seed_hint);
        ++stats.llm_calls;
        stats.input_tokens += approx_token_count(prompt);
        stats.output_tokens += approx_token_count(raw);

        std::map<std::size_t, std::string> candidates;
        try {
            candidates = parse_response(raw, subset.size()).candidates;
        } catch (const MalformedResponseError&) {
            // Nothing parsed: the whole round failed; retry loop handles it.
        }

        std::vector<std::size_t> still_pending;
        for (std::size_t pos = 0; pos < pending.size(); ++pos) {
            const std::size_t idx = pending[pos];
            const auto it = candidates.find(pos);
            if (it == candidates.end()) {
                ++stats.rejected_samples;
                still_pending.push_back(idx);
                continue;
            }
            bool verified = false;
            std::string canonical;
            try {
                const AnchorCheck check =
                    verify_anchors(instance.tokens(), hypotheses[idx].mask(), it->second);
                verified = check.verified;
                canonical = detokenize(check.candidate_tokens);
            } catch (const EmptyInputError&) {
                verified = false;
            }
            if (verified) {
                accepted[idx] = std::move(canonical);
            } else {
                ++stats.rejected_samples;
                still_pending.push_back(idx);
            }
        }
        pending = std::move(still_pending);
    }

    const std::size_t dropped = pending.size();

    std::vector<std::size_t> admitted_indices;
    std::vector<std::string> admitted_texts;
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
        if (accepted[i].has_value()) {
            admitted_indices.push_back(i);
            admitted_texts.push_back(*accepted[i]);
        }
    }

    const auto probs = classifier.predict(admitted_texts);
    if (probs.size() != admitted_texts.size()) {
        throw BackendError("generate_neighborhood: classifier returned " +
                           std::to_string(probs.size()) + " vectors for " +
                           std::to_string(admitted_texts.size()) + " texts");
    }

    std::vector<PerturbationSample> samples;
    samples.reserve(admitted_indices.size());
    for (std::size_t k = 0; k < admitted_indices.size(); ++k) {
        const std::size_t idx = admitted_indices[k];
        samples.push_back(PerturbationSample::make(hypotheses[idx], admitted_texts[k],
                                                   /*anchor_verified=*/true, probs[k],
                                                   /*proximity=*/1.0, SampleOrigin::Generated));
    }

    if (samples.size() < static_cast<std::size_t>(policy.min_neighborhood)) {
        throw InsufficientNeighborhoodError(
            "generate_neighborhood: only " + std::to_string(samples.size()) +
            " samples admitted, need " + std::to_string(policy.min_neighborhood));
    }

    GenerationResult result{Neighborhood::make(instance, std::move(samples), dropped), stats};
    result.stats.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                    std::chrono::steady_clock::now() - started)
                                    .count();
    return result;
}

std::size_t approx_token_count(const std::string& text) {
    std::size_t count = 0;
    bool in_token = false;
    for (char c : text) {
        const bool ws = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
        if (!ws && !in_token) ++count;
        in_token = !ws;
    }
    return count;
}

} // namespace limellm
