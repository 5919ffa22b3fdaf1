// Copyright 2026 The ckpool Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace ckpool {

// Rabin fingerprint of a byte window: the window is read as a polynomial over
// GF(2) (first byte most significant) and reduced modulo an irreducible
// polynomial of degree 53. Reduction is table driven, so appending a byte and
// removing the oldest byte are both O(1).
class RabinWindow {
 public:
  static constexpr uint64_t kPolynomial = 0x3DA3358B4DC173ULL;
  static constexpr int kDegree = 53;

  explicit RabinWindow(size_t window_size);

  size_t window_size() const { return window_size_; }

  // Fingerprint of `window` computed from scratch. window.size() must equal
  // window_size().
  uint64_t hash(std::span<const uint8_t> window) const;

  // fingerprint(w[0..n) ++ b) without the window-size truncation.
  uint64_t append(uint64_t fp, uint8_t b) const {
    const uint64_t top = fp >> (kDegree - 8);
    return ((fp << 8) | b) ^ shift_table_[top];
  }

  // Slide a full window one byte: drop `out` (the oldest byte), add `in`.
  uint64_t roll(uint64_t fp, uint8_t out, uint8_t in) const {
    return append(fp ^ out_table_[out], in);
  }

 private:
  size_t window_size_;
  // shift_table_[t] = (t * x^53 mod P) | (t << 53): clears the byte that
  // overflows past the degree and folds it back in.
  std::array<uint64_t, 256> shift_table_{};
  // out_table_[b] = b * x^(8 (m - 1)) mod P: contribution of the oldest byte.
  std::array<uint64_t, 256> out_table_{};
};

// Convenience: fingerprint of one window with a shared default table.
uint64_t rolling_window_hash(std::span<const uint8_t> window);

}  // namespace ckpool
