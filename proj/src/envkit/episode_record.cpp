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

#include "polref/envkit/episode_record.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace polref::envkit {

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }
  void read(std::uint8_t* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw std::runtime_error("truncated EpisodeRecord");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

std::size_t frame_bytes(EnvId env) {
  const auto s = static_cast<std::size_t>(frame_size(env));
  return s * s * 3;
}

}  // namespace

std::vector<std::uint8_t> EpisodeRecord::serialize() const {
  std::vector<std::uint8_t> out = {'P', 'R', 'E', 'C'};
  put<std::uint16_t>(out, kVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(env));
  std::uint8_t flags = has_frames ? 1u : 0u;
  flags |= static_cast<std::uint8_t>((static_cast<unsigned>(background) & 3u) << 1);
  if (spawn == SpawnColumn::center) flags |= 8u;
  put<std::uint8_t>(out, flags);
  put<std::uint8_t>(out, object_count);
  put<std::uint64_t>(out, seed);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(steps.size()));
  const std::size_t fb = frame_bytes(env);
  for (const auto& s : steps) {
    put<std::uint8_t>(out, s.action);
    std::uint32_t bits = 0;
    std::memcpy(&bits, &s.reward, 4);
    put<std::uint32_t>(out, bits);
    put<std::uint8_t>(out, s.done ? 1 : 0);
    if (has_frames) {
      if (s.frame.size() != fb) throw std::runtime_error("EpisodeRecord frame has wrong size");
      out.insert(out.end(), s.frame.begin(), s.frame.end());
    }
  }
  return out;
}

EpisodeRecord EpisodeRecord::deserialize(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  std::uint8_t magic[4];
  r.read(magic, 4);
  if (std::memcmp(magic, "PREC", 4) != 0) throw std::runtime_error("not an EpisodeRecord (bad magic)");
  const auto version = r.get<std::uint16_t>();
  if (version != kVersion) throw std::runtime_error("unsupported EpisodeRecord version " + std::to_string(version));
  EpisodeRecord rec;
  const auto env = r.get<std::uint8_t>();
  if (env != 1 && env != 2) throw std::runtime_error("unknown env id in EpisodeRecord");
  rec.env = static_cast<EnvId>(env);
  const auto flags = r.get<std::uint8_t>();
  rec.has_frames = flags & 1u;
  rec.background = static_cast<BackgroundKind>((flags >> 1) & 3u);
  rec.spawn = (flags & 8u) ? SpawnColumn::center : SpawnColumn::random;
  rec.object_count = r.get<std::uint8_t>();
  rec.seed = r.get<std::uint64_t>();
  const auto count = r.get<std::uint32_t>();
  const std::size_t fb = frame_bytes(rec.env);
  rec.steps.resize(count);
  for (auto& s : rec.steps) {
    s.action = r.get<std::uint8_t>();
    const auto bits = r.get<std::uint32_t>();
    std::memcpy(&s.reward, &bits, 4);
    s.done = r.get<std::uint8_t>() != 0;
    if (rec.has_frames) {
      s.frame.resize(fb);
      r.read(s.frame.data(), fb);
    }
  }
  if (r.remaining() != 0) throw std::runtime_error("trailing bytes after EpisodeRecord");
  return rec;
}

void EpisodeRecord::save(const std::string& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

EpisodeRecord EpisodeRecord::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return deserialize({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});
}

EpisodeRecord record_episode(Env& env, std::uint64_t seed, const ActionSource& policy, bool with_frames) {
  EpisodeRecord rec;
  rec.env = env.id();
  rec.object_count = static_cast<std::uint8_t>(env.spec().object_count);
  rec.has_frames = with_frames;
  rec.background = env.spec().background.kind();
  rec.spawn = env.spec().spawn;
  rec.seed = seed;
  env.reset(seed);
  while (!env.done()) {
    const int action = policy(env);
    auto result = env.step(action);
    RecordStep s;
    s.action = static_cast<std::uint8_t>(action);
    s.reward = static_cast<float>(result.reward);
    s.done = result.done;
    if (with_frames) s.frame = std::move(result.frame.rgb);
    rec.steps.push_back(std::move(s));
  }
  return rec;
}

EpisodeRecord replay_episode(const EpisodeRecord& record, bool with_frames) {
  if (record.background == BackgroundKind::directory)
    throw std::runtime_error("cannot replay an episode recorded over a directory background");
  EnvSpec spec;
  spec.id = record.env;
  spec.object_count = record.object_count;
  spec.background = record.background == BackgroundKind::procedural ? BackgroundSource::procedural()
                                                                      : BackgroundSource::black();
  spec.spawn = record.spawn;
  auto env = make_env(spec);
  std::size_t t = 0;
  auto rec = record_episode(*env, record.seed, [&](const Env&) {
    if (t >= record.steps.size()) throw std::runtime_error("action stream shorter than episode");
    return static_cast<int>(record.steps[t++].action);
  }, with_frames);
  return rec;
}

}  // namespace polref::envkit
