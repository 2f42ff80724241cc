#pragma once

#include <cstdint>

namespace cascade_recon {

// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based random stream: every draw is a pure function of the stream
/// key and a (step, slot) counter, so results do not depend on the order in
/// which draws are made.
class CounterRng {
 public:
  constexpr explicit CounterRng(std::uint64_t seed) : key_(mix64(seed ^ 0x5851f42d4c957f2dULL)) {}

  // Independent child stream, e.g. one per cascade.
  constexpr CounterRng substream(std::uint64_t index) const {
    return CounterRng(key_, mix64(key_ ^ mix64(index + 0x632be59bd9b4e019ULL)));
  }

  constexpr std::uint64_t bits(std::uint64_t step, std::uint64_t slot) const {
    return mix64(key_ ^ mix64(step * 0xd6e8feb86659fd93ULL + mix64(slot)));
  }

  // Uniform in [0, 1) with 53 random bits.
  constexpr double uniform(std::uint64_t step, std::uint64_t slot) const {
    return static_cast<double>(bits(step, slot) >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n), n > 0.
  constexpr std::uint64_t below(std::uint64_t n, std::uint64_t step, std::uint64_t slot) const {
    // Multiply-shift; bias is < n / 2^64.
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(bits(step, slot)) * n) >> 64);
  }

  constexpr std::uint64_t key() const { return key_; }

 private:
  constexpr CounterRng(std::uint64_t, std::uint64_t key) : key_(key) {}

  std::uint64_t key_;
};

}  // namespace cascade_recon
