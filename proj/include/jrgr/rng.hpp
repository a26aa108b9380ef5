#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace jrgr {

using Rng = std::mt19937_64;

// Expands a root seed into an independent per-purpose seed. Every random
// stream in the project is derived from one root seed through this function.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream);
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::uint64_t index);

inline Rng make_rng(std::uint64_t root, std::string_view stream) {
  return Rng(derive_seed(root, stream));
}

}  // namespace jrgr
