#pragma once

#include <string>
#include <vector>

#include "limellm/domain.hpp"

namespace limellm {

// Splits text on runs of Unicode whitespace. Every maximal non-whitespace
// run becomes one token; order is preserved. Throws EmptyInputError when the
// text contains no tokens.
std::vector<Token> tokenize(const std::string& text);

// Token surfaces joined by single spaces (the canonical text form).
std::string detokenize(const std::vector<Token>& tokens);

// Kept tokens (bit 1) joined by single spaces, original order. Empty string
// when every bit is 0. Throws LengthMismatchError on size mismatch.
std::string apply_deletion(const std::vector<Token>& tokens, const BinaryMask& mask);

// Kept tokens verbatim; each masked token becomes "[SLOT_k]" with k the
// running masked-slot index starting at 0.
std::string render_masked_template(const std::vector<Token>& tokens, const BinaryMask& mask);

struct AnchorCheck {
    bool verified = false;
    std::vector<Token> candidate_tokens;
};

// Tokenizes candidate and checks that the anchor surfaces (bit 1, in order)
// appear as a case-sensitive subsequence of the candidate's token surfaces.
AnchorCheck verify_anchors(const std::vector<Token>& tokens, const BinaryMask& mask,
                           const std::string& candidate);

} // namespace limellm
