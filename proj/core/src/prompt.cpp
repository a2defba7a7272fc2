#include <cctype>
#include <cmath>
#include <string>
#include <vector>

#include "stylid/error.hpp"
#include "stylid/facegen.hpp"

namespace stylid {

namespace {

std::vector<std::string> normalized_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    const auto uc = static_cast<unsigned char>(ch);
    if (std::isalnum(uc)) {
      cur.push_back(static_cast<char>(std::tolower(uc)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

Tensor embed_prompt(std::string_view text, std::size_t dim) {
  if (dim == 0) throw InputError("prompt embedding dimension must be positive");
  const auto tokens = normalized_tokens(text);
  if (tokens.empty()) throw InputError("prompt has no tokens");
  Tensor acc({dim});
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    RngStream s(hash_combine(fnv1a(tokens[i]), i), 0x70726f6d7074ull);
    acc += gaussian(s, {dim});
  }
  const double norm = frobenius_norm(acc);
  return acc * (1.0 / norm);
}

}  // namespace stylid
