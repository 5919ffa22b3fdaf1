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

#include "ckpool/rolling_hash.hpp"

#include "ckpool/error.hpp"

namespace ckpool {

namespace {

// x mod P for x of at most 64 bits, by long division.
uint64_t reduce(uint64_t x) {
  for (int bit = 63; bit >= RabinWindow::kDegree; --bit) {
    if ((x >> bit) & 1) x ^= RabinWindow::kPolynomial << (bit - RabinWindow::kDegree);
  }
  return x;
}

}  // namespace

RabinWindow::RabinWindow(size_t window_size) : window_size_(window_size) {
  if (window_size == 0) fail(ErrorCode::kUsage, "rolling window must be non-empty");
  for (uint64_t t = 0; t < 256; ++t) {
    const uint64_t overflow = t << kDegree;
    shift_table_[t] = reduce(overflow) | overflow;
  }
  for (uint64_t b = 0; b < 256; ++b) {
    uint64_t fp = append(0, static_cast<uint8_t>(b));
    for (size_t i = 1; i < window_size_; ++i) fp = append(fp, 0);
    out_table_[b] = fp;
  }
}

uint64_t RabinWindow::hash(std::span<const uint8_t> window) const {
  uint64_t fp = 0;
  for (uint8_t b : window) fp = append(fp, b);
  return fp;
}

uint64_t rolling_window_hash(std::span<const uint8_t> window) {
  // The from-scratch fingerprint only uses the shift table, which does not
  // depend on the window size.
  static const RabinWindow kTables(1);
  return kTables.hash(window);
}

}  // namespace ckpool
