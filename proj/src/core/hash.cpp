#include "headlab/core/hash.hpp"

#include "headlab/core/common.hpp"

#include <cstdio>
#include <fstream>
#include <vector>

namespace headlab {

std::string to_hex(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

uint64_t hash_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), "hash_file: cannot open " + path);
  uint64_t h = 0xcbf29ce484222325ULL;
  std::vector<char> buf(1 << 16);
  while (f) {
    f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    std::streamsize n = f.gcount();
    if (n > 0) h = fnv1a64(buf.data(), static_cast<size_t>(n), h);
  }
  return h;
}

}  // namespace headlab
