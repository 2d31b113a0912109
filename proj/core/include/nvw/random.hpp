#pragma once

#include <cstdint>
#include <limits>

namespace nvw {

/// SplitMix64 output finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Random stream purposes. Each gets an independent key space.
enum class Stream : std::uint64_t {
  pixel_offsets = 1,
  resonance_scatter = 2,
  shot_noise = 3,
  fixed_pattern = 4,
};

/// Derives a stream key from the run seed and up to three counters
/// (e.g. acquisition, pixel, frame). Draws keyed this way are independent
/// of how work is partitioned across threads.
constexpr std::uint64_t stream_key(std::uint64_t seed, Stream stream, std::uint64_t a = 0,
                                   std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t k = mix64(seed ^ 0x9e3779b97f4a7c15ULL);
  k = mix64(k ^ static_cast<std::uint64_t>(stream));
  k = mix64(k ^ (a + 0x632be59bd9b4e019ULL));
  k = mix64(k ^ (b + 0x8cb92ba72f3d8dd7ULL));
  k = mix64(k ^ (c + 0xd1b54a32d192ed03ULL));
  return k;
}

/// Counter-keyed SplitMix64 generator; satisfies UniformRandomBitGenerator so
/// it can drive the <random> distributions.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit constexpr CounterRng(std::uint64_t key) : state_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  /// Uniform double in [0, 1).
  constexpr double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

}  // namespace nvw
