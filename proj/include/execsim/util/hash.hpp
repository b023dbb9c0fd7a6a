#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace execsim {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;

constexpr std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = kFnvOffset) noexcept {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// First line of every CSV the tools write.
inline std::string config_hash_line(std::string_view hash_hex) {
  return "# config_hash=" + std::string(hash_hex) + "\n";
}

}  // namespace execsim
