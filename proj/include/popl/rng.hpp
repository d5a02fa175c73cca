// Copyright 2026 The POPL Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef POPL_RNG_HPP_
#define POPL_RNG_HPP_

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace popl {

// SplitMix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t MixSeed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t HashName(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// A seeded pseudo-random stream. Child streams are derived from the parent
// seed only, never from the parent's consumed state, so adding draws to one
// component does not perturb another.
class RandomStream {
 public:
  using engine_type = std::mt19937_64;

  explicit RandomStream(std::uint64_t seed = 0) : seed_(seed), engine_(MixSeed(seed)) {}

  std::uint64_t seed() const { return seed_; }
  engine_type& engine() { return engine_; }

  RandomStream Child(std::string_view name) const {
    return RandomStream(MixSeed(seed_ ^ HashName(name)));
  }
  RandomStream Child(std::uint64_t index) const {
    return RandomStream(MixSeed(seed_ + MixSeed(index + 0x51ed27ULL)));
  }
  RandomStream Child(std::uint64_t a, std::uint64_t b) const { return Child(a).Child(b); }

  double Uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double Uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double Normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  bool Bernoulli(double p) { return std::bernoulli_distribution(p)(engine_); }
  // Uniform integer in [0, n).
  std::size_t Index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  template <typename T>
  void Shuffle(std::vector<T>& v) {
    // Fisher-Yates with our own index draws so results do not depend on the
    // library's std::shuffle implementation.
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[Index(i)]);
    }
  }

 private:
  std::uint64_t seed_;
  engine_type engine_;
};

}  // namespace popl

#endif  // POPL_RNG_HPP_
