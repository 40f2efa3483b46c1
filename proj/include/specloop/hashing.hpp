#pragma once

#include <string>
#include <string_view>

namespace specloop {

/// SHA-256 of the bytes, lowercase hex (64 chars).
std::string sha256_hex(std::string_view bytes);

bool is_sha256_hex(std::string_view text);

}  // namespace specloop
