#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace physlab {

/// Hex digest of a byte string (FIPS 180-4 SHA-256).
std::string sha256_hex(const std::string& data);

/// Hex digest of a file's contents; throws std::runtime_error on I/O failure.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace physlab
