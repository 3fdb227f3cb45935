#pragma once

// Shared planted-keyword fixture: instances whose label hangs on exactly one
// token, rationale marking that token, and deterministic mock backends. The
// same corpus drives the baseline recovery tests and the acceptance suite.

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "support/oracles.hpp"

namespace synthetic {

struct Item {
    std::string id;
    std::string text;
    std::size_t planted_index = 0;
    std::vector<std::uint8_t> rationale;  // 1 at the planted token only
};

struct Corpus {
    std::vector<Item> items;
    std::map<std::string, std::vector<double>> classifier_lexicon;
    std::vector<std::string> neutral_lexicon;
    std::map<std::string, std::vector<std::string>> boundary_lexicon;
    std::vector<std::string> label_names;
    std::string planted_word;
};

// `count` instances with d in [8,15]; the planted word carries logit +2
// toward class 0, fillers carry a small per-word logit when
// distractor_weights is set (kept small so class 0 always stays predicted).
inline Corpus make_planted_corpus(std::uint64_t seed, std::size_t count,
                                  bool distractor_weights) {
    static const std::vector<std::string> kFillers = {
        "the",   "film",   "plot",    "was",    "quite",  "rather", "its",    "pace",
        "scene", "script", "acting",  "camera", "angle",  "music",  "score",  "set",
        "light", "frame",  "editing", "cast",   "drama",  "story",  "climax", "detail",
        "tone",  "style",  "voice",   "theme",  "moment", "ending", "mood",   "shot"};

    Corpus corpus;
    corpus.planted_word = "dreadful";
    corpus.label_names = {"negative", "positive"};
    corpus.neutral_lexicon = {"texture", "rhythm", "outline", "middle", "segment"};
    corpus.boundary_lexicon = {{"positive", {"wonderful", "delightful", "superb"}},
                               {"negative", {"woeful", "dire", "grim"}}};

    std::mt19937_64 rng(seed);
    const auto pick = [&](std::size_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = rng();
        while (v >= limit) v = rng();
        return static_cast<std::size_t>(v % n);
    };

    corpus.classifier_lexicon[corpus.planted_word] = {2.0, 0.0};
    if (distractor_weights) {
        for (const std::string& filler : kFillers) {
            const double w = (oracles::unit_uniform(rng) - 0.5) * 0.1;  // in [-0.05, 0.05]
            corpus.classifier_lexicon[filler] = {w, 0.0};
        }
    }

    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t d = 8 + pick(8);  // 8..15 tokens
        Item item;
        item.id = "syn-" + std::to_string(i);
        item.planted_index = pick(d);
        std::string text;
        for (std::size_t j = 0; j < d; ++j) {
            if (!text.empty()) text += ' ';
            if (j == item.planted_index) {
                text += corpus.planted_word;
            } else {
                text += kFillers[pick(kFillers.size())];
            }
        }
        item.text = std::move(text);
        item.rationale.assign(d, 0);
        item.rationale[item.planted_index] = 1;
        corpus.items.push_back(std::move(item));
    }
    return corpus;
}

} // namespace synthetic
