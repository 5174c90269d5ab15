#pragma once

#include <cstdint>
#include <cstddef>
#include <string>

namespace headlab {

/// FNV-1a 64-bit over raw bytes. Used for artifact fingerprints and config
/// hashes; not cryptographic.
inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t fnv1a64(const std::string& s, uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a64(s.data(), s.size(), h);
}

std::string to_hex(uint64_t v);

/// Hash of a file's bytes; throws on missing file.
uint64_t hash_file(const std::string& path);

}  // namespace headlab
