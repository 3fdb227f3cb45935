#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "limellm/backends.hpp"
#include "limellm/domain.hpp"

namespace limellm {

// Per-dataset prompt configuration. The scaffold text is versioned config
// data (see prompts/), not code; template_version joins the LLM cache key.
struct PromptSpec {
    std::string dataset_description;
    std::vector<std::string> label_names;
    std::vector<std::string> negative_constraints;  // extra directive lines, verbatim
    std::string template_version = "v1";
    std::string template_text;

    // Scaffold shipped as prompts/infill_v1.txt; kept here as the fallback so
    // the engine works without a prompt file on disk.
    static const std::string& default_template();

    static PromptSpec make(std::string dataset_description, std::vector<std::string> label_names,
                           std::vector<std::string> negative_constraints = {},
                           std::string template_version = "v1", std::string template_text = {});
};

struct GenerationPolicy {
    int max_retries = 2;
    int min_neighborhood = 8;
    double temperature = 0.7;

    void validate() const;  // throws ConfigError
};

struct GenerationStats {
    std::size_t llm_calls = 0;
    std::size_t input_tokens = 0;
    std::size_t output_tokens = 0;
    std::size_t rejected_samples = 0;
    std::int64_t wall_time_ms = 0;
};

// One prompt covering every hypothesis: the dataset description, the original
// text, one numbered template+directive block per hypothesis, and the strict
// "i: <sentence>" output format. Boundary hypotheses that mask the
// top-saliency token get a no-synonyms constraint naming that token.
std::string build_batched_prompt(const Instance& instance,
                                 const std::vector<PerturbationHypothesis>& hypotheses,
                                 const PromptSpec& spec,
                                 std::optional<std::size_t> top_saliency_index = std::nullopt);

struct ParsedResponse {
    std::map<std::size_t, std::string> candidates;  // hypothesis index -> text
    std::vector<std::string> diagnostics;           // dropped-line notes
};

// Extracts "i: sentence" lines. Out-of-range or duplicate indices are dropped
// with a diagnostic. Throws MalformedResponseError when nothing parses.
ParsedResponse parse_response(const std::string& raw, std::size_t hypothesis_count);

struct GenerationResult {
    Neighborhood neighborhood;
    GenerationStats stats;
};

// Runs the batched call / verify / retry loop, scores all admitted texts in
// one classifier call, and assembles the neighborhood. Hypotheses that still
// fail after max_retries are dropped and counted.
GenerationResult generate_neighborhood(const Instance& instance,
                                       const std::vector<PerturbationHypothesis>& hypotheses,
                                       const PromptSpec& spec, LlmBackend& llm,
                                       ClassifierBackend& classifier,
                                       const GenerationPolicy& policy,
                                       std::optional<std::size_t> top_saliency_index = std::nullopt,
                                       std::optional<std::int64_t> seed_hint = std::nullopt);

// Whitespace-token count used for the stats ledger.
std::size_t approx_token_count(const std::string& text);

} // namespace limellm
