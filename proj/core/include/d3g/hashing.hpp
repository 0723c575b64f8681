#pragma once

#include <string>
#include <string_view>

namespace d3g {

// Lowercase hex SHA-256 of the input bytes. Content ids and cache keys are
// addressed by this hash.
std::string sha256_hex(std::string_view bytes);

// True iff s is a 64-character lowercase/uppercase hex string.
bool looks_like_sha256(std::string_view s);

}  // namespace d3g
