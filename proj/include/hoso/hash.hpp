#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>

namespace hoso {

// FNV-1a, 64 bit. Used for parameter checksums and bank content hashes;
// not for anything adversarial.
class Fnv1a {
 public:
  void bytes(const void* data, std::size_t n) noexcept {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001B3ULL;
    }
  }
  template <typename T>
  void values(std::span<const T> v) noexcept {
    bytes(v.data(), v.size_bytes());
  }
  template <typename T>
  void value(const T& v) noexcept {
    bytes(&v, sizeof(T));
  }
  void text(std::string_view s) noexcept { bytes(s.data(), s.size()); }
  std::uint64_t digest() const noexcept { return h_; }

 private:
  std::uint64_t h_ = 0xCBF29CE484222325ULL;
};

}  // namespace hoso
