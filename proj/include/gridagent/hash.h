#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <string_view>

namespace gridagent {

// 64-bit FNV-1a over a field stream. Strings are length-prefixed so
// concatenations cannot collide; doubles hash their bit pattern.
struct Fnv {
  std::uint64_t h = 1469598103934665603ull;

  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= c[i];
      h *= 1099511628211ull;
    }
  }
  void str(std::string_view s) {
    std::uint64_t n = s.size();
    bytes(&n, sizeof n);
    bytes(s.data(), s.size());
  }
  void num(double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    bytes(&bits, sizeof bits);
  }
  void flag(bool b) {
    unsigned char c = b ? 1 : 0;
    bytes(&c, 1);
  }
  void count(std::size_t n) {
    std::uint64_t v = n;
    bytes(&v, sizeof v);
  }
};

}  // namespace gridagent
