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
#include <functional>
#include <string>
#include <vector>

#include "polref/envkit/env.hpp"

namespace polref::envkit {

// EpisodeRecord v1, little-endian:
//
//   offset  size  field
//   0       4     magic "PREC"
//   4       2     version (1)
//   6       1     env id (1 pacman, 2 falling_digit)
//   7       1     flags: bit 0 frames present, bits 1-2 background kind,
//                 bit 3 centered falling-digit spawn
//   8       1     object count (dots / targets)
//   9       8     seed
//   17      4     step count
//   21      ...   steps: action u8, reward f32, done u8, [frame RGB bytes]
//
// Frames are the post-step observation, row-major RGB at the env frame size.
struct RecordStep {
  std::uint8_t action = 0;
  float reward = 0.0f;
  bool done = false;
  std::vector<std::uint8_t> frame;

  friend bool operator==(const RecordStep&, const RecordStep&) = default;
};

struct EpisodeRecord {
  static constexpr std::uint16_t kVersion = 1;
  static constexpr std::size_t kHeaderSize = 21;

  EnvId env = EnvId::pacman;
  std::uint8_t object_count = 0;
  bool has_frames = true;
  BackgroundKind background = BackgroundKind::black;
  SpawnColumn spawn = SpawnColumn::random;
  std::uint64_t seed = 0;
  std::vector<RecordStep> steps;

  std::vector<std::uint8_t> serialize() const;
  // Throws std::runtime_error on bad magic, unsupported version or truncation.
  static EpisodeRecord deserialize(const std::vector<std::uint8_t>& bytes);
  void save(const std::string& path) const;
  static EpisodeRecord load(const std::string& path);

  friend bool operator==(const EpisodeRecord&, const EpisodeRecord&) = default;
};

using ActionSource = std::function<int(const Env&)>;

// Runs one episode from env.reset(seed) to termination.
EpisodeRecord record_episode(Env& env, std::uint64_t seed, const ActionSource& policy, bool with_frames);

// Replays the recorded actions in a fresh env built from the record header.
// Only black and procedural backgrounds can be reconstructed.
EpisodeRecord replay_episode(const EpisodeRecord& record, bool with_frames);

}  // namespace polref::envkit
