// Copyright (c) 2026 The fairdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace fairdiff {

/// Incremental FNV-1a 64-bit hash. Used for artifact integrity and
/// config identity, not for security.
class Fnv1a64 {
 public:
  void update(const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= static_cast<std::uint64_t>(bytes[i]);
      state_ *= 0x100000001b3ULL;
    }
  }
  void update(std::string_view s) { update(s.data(), s.size()); }

  std::uint64_t value() const { return state_; }

  /// 16-char lowercase hex digest.
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string hash_hex(std::string_view s);

}  // namespace fairdiff
