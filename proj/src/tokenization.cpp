#include "limellm/tokenization.hpp"

#include <cstdint>

namespace limellm {
namespace {

bool is_whitespace_codepoint(std::uint32_t cp) {
    switch (cp) {
        case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D:
        case 0x20: case 0x85: case 0xA0: case 0x1680:
        case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

// Decodes one UTF-8 codepoint starting at i; advances i past it. Malformed
// bytes are passed through as opaque non-whitespace.
std::uint32_t next_codepoint(const std::string& s, std::size_t& i) {
    const auto byte = [&](std::size_t k) { return static_cast<std::uint8_t>(s[k]); };
    const std::uint8_t b0 = byte(i);
    if (b0 < 0x80) {
        i += 1;
        return b0;
    }
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) { len = 2; cp = b0 & 0x1F; }
    else if ((b0 & 0xF0) == 0xE0) { len = 3; cp = b0 & 0x0F; }
    else if ((b0 & 0xF8) == 0xF0) { len = 4; cp = b0 & 0x07; }
    else { i += 1; return 0xFFFD; }
    if (i + len > s.size()) { i += 1; return 0xFFFD; }
    for (std::size_t k = 1; k < len; ++k) {
        const std::uint8_t bk = byte(i + k);
        if ((bk & 0xC0) != 0x80) { i += 1; return 0xFFFD; }
        cp = (cp << 6) | (bk & 0x3F);
    }
    i += len;
    return cp;
}

} // namespace

std::vector<Token> tokenize(const std::string& text) {
    std::vector<Token> tokens;
    std::string current;
    std::size_t i = 0;
    while (i < text.size()) {
        const std::size_t start = i;
        const std::uint32_t cp = next_codepoint(text, i);
        if (is_whitespace_codepoint(cp)) {
            if (!current.empty()) {
                tokens.push_back(Token{std::move(current), tokens.size()});
                current.clear();
            }
        } else {
            current.append(text, start, i - start);
        }
    }
    if (!current.empty()) {
        tokens.push_back(Token{std::move(current), tokens.size()});
    }
    if (tokens.empty()) {
        throw EmptyInputError("tokenize: text is empty or all whitespace");
    }
    return tokens;
}

std::string detokenize(const std::vector<Token>& tokens) {
    std::string out;
    for (const Token& t : tokens) {
        if (!out.empty()) out.push_back(' ');
        out += t.surface;
    }
    return out;
}

std::string apply_deletion(const std::vector<Token>& tokens, const BinaryMask& mask) {
    if (mask.size() != tokens.size()) {
        throw LengthMismatchError("apply_deletion: mask length " + std::to_string(mask.size()) +
                                  " != token count " + std::to_string(tokens.size()));
    }
    std::string out;
    for (std::size_t j = 0; j < tokens.size(); ++j) {
        if (!mask.kept(j)) continue;
        if (!out.empty()) out.push_back(' ');
        out += tokens[j].surface;
    }
    return out;
}

std::string render_masked_template(const std::vector<Token>& tokens, const BinaryMask& mask) {
    if (mask.size() != tokens.size()) {
        throw LengthMismatchError("render_masked_template: mask length " +
                                  std::to_string(mask.size()) + " != token count " +
                                  std::to_string(tokens.size()));
    }
    std::string out;
    std::size_t slot = 0;
    for (std::size_t j = 0; j < tokens.size(); ++j) {
        if (!out.empty()) out.push_back(' ');
        if (mask.kept(j)) {
            out += tokens[j].surface;
        } else {
            out += "[SLOT_" + std::to_string(slot++) + "]";
        }
    }
    return out;
}

AnchorCheck verify_anchors(const std::vector<Token>& tokens, const BinaryMask& mask,
                           const std::string& candidate) {
    if (mask.size() != tokens.size()) {
        throw LengthMismatchError("verify_anchors: mask length " + std::to_string(mask.size()) +
                                  " != token count " + std::to_string(tokens.size()));
    }
    AnchorCheck check;
    check.candidate_tokens = tokenize(candidate);

    std::vector<const std::string*> anchors;
    anchors.reserve(mask.kept_count());
    for (std::size_t j = 0; j < tokens.size(); ++j) {
        if (mask.kept(j)) anchors.push_back(&tokens[j].surface);
    }

    std::size_t next = 0;
    for (const Token& t : check.candidate_tokens) {
        if (next < anchors.size() && t.surface == *anchors[next]) ++next;
    }
    check.verified = next == anchors.size();
    return check;
}

} // namespace limellm
