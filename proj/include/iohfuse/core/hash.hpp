#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace iohfuse {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// 64-bit FNV-1a; used for seed derivation and stable keyed ordering.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 1469598103934665603ULL);

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Independent sub-stream seed for (seed, tag).
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) { return mix64(seed ^ fnv1a64(tag)); }

}  // namespace iohfuse
