#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "stylid/rng.hpp"
#include "stylid/tensor.hpp"

namespace stylid::testing {

inline Tensor random_tensor(RngStream& rng, const Shape& shape, double scale = 1.0) {
  return gaussian(rng, shape) * scale;
}

// FNV-1a over bytes; good enough to compare artifact sets.
inline std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// File name -> checksum for every regular file under dir.
inline std::map<std::string, std::uint64_t> checksum_dir(const std::filesystem::path& dir) {
  std::map<std::string, std::uint64_t> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[std::filesystem::relative(e.path(), dir).string()] = fnv1a(slurp(e.path()));
  }
  return out;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("stylid_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace stylid::testing
