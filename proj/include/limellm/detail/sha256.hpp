#pragma once

#include <string>
#include <string_view>

namespace limellm::detail {

// Lowercase hex digest (64 chars) of the SHA-256 of data.
std::string sha256_hex(std::string_view data);

} // namespace limellm::detail
