#pragma once

#include <cstdint>
#include <string>

namespace anklesim {

// FIPS 180-4 SHA-256, hex digest.
std::string sha256_hex(const void* data, size_t len);
std::string sha256_hex(const std::string& s);
std::string sha256_file_hex(const std::string& path);

}  // namespace anklesim
