// Copyright 2026 The polref Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>

namespace polref::envkit {

// PCG32 (XSH-RR 64/32), identical to the reference pcg32_random_r. Every
// environment draws exclusively through next_u32() / bounded(), so a second
// implementation that replays the same call order reproduces the same
// episodes bit for bit.
class Pcg32 {
 public:
  static constexpr std::uint64_t kDefaultStream = 54u;
  static constexpr std::uint64_t kMultiplier = 6364136223846793005ULL;

  Pcg32() : Pcg32(0u, kDefaultStream) {}
  Pcg32(std::uint64_t init_state, std::uint64_t init_seq) { seed(init_state, init_seq); }

  // pcg32_srandom_r.
  void seed(std::uint64_t init_state, std::uint64_t init_seq) {
    state_ = 0u;
    inc_ = (init_seq << 1u) | 1u;
    next_u32();
    state_ += init_state;
    next_u32();
  }

  std::uint32_t next_u32() {
    const std::uint64_t old = state_;
    state_ = old * kMultiplier + inc_;
    const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    const auto rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
  }

  // pcg32_boundedrand_r: unbiased draw in [0, bound) by threshold rejection.
  std::uint32_t bounded(std::uint32_t bound) {
    const std::uint32_t threshold = (-bound) % bound;
    for (;;) {
      const std::uint32_t r = next_u32();
      if (r >= threshold) return r % bound;
    }
  }

  // Uniform in [0, 1) with 32 bits of resolution. Not used by env dynamics.
  double uniform() { return next_u32() * (1.0 / 4294967296.0); }

  std::uint64_t state() const { return state_; }
  std::uint64_t increment() const { return inc_; }

  // Seeding rule shared by every engine: seed goes into init_state, the
  // stream is fixed.
  static Pcg32 from_seed(std::uint64_t seed) { return Pcg32(seed, kDefaultStream); }
  // Episode e of a run seeded with `seed` uses from_seed(seed ^ e).
  static Pcg32 for_episode(std::uint64_t seed, std::uint64_t episode) {
    return from_seed(seed ^ episode);
  }

  friend bool operator==(const Pcg32& a, const Pcg32& b) {
    return a.state_ == b.state_ && a.inc_ == b.inc_;
  }

 private:
  std::uint64_t state_ = 0;
  std::uint64_t inc_ = 0;
};

}  // namespace polref::envkit
