#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ltrc {

// SplitMix64 finalizer (Steele, Lea & Flood 2014); used only to derive seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Sub-stream seed for a named role: splitmix64(seed ^ splitmix64(fnv1a64(tag))).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) noexcept {
  return splitmix64(seed ^ splitmix64(fnv1a64(tag)));
}

/// Seed of the b-th replication of a campaign.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(seed) + 0xd1b54a32d192ed03ULL * (index + 1));
}

/// One named random stream backed by a 64-bit Mersenne Twister.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::string_view tag) : engine_(derive_seed(seed, tag)) {}

  double normal() { return normal_(engine_); }
  double exponential() { return exponential_(engine_); }
  double uniform() { return uniform_(engine_); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::exponential_distribution<double> exponential_{1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace ltrc
