#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace fedmood {

// Deterministic, bit-portable random streams.
//
// Core generator is xoshiro256**; the four state words come from a SplitMix64
// sequence started at seed XOR (stream_id * golden-ratio constant), so every
// (seed, stream_id) pair is an independent stream and the same pair always
// yields the same sequence on any platform.  std::mt19937 + std::*_distribution
// are deliberately avoided: distribution output is implementation-defined.
//
// Stream-id registry (one stream per concern keeps components order-independent):
//   1 generator, 2 server, 3 init, 4 partition, 5 gradcheck,
//   0x1000 + party_id for each party's local training,
//   0x2000 + user_id for each user's session draws in the corpus generator.
class RngStream {
 public:
  static constexpr std::uint64_t kGeneratorStream = 1;
  static constexpr std::uint64_t kServerStream = 2;
  static constexpr std::uint64_t kInitStream = 3;
  static constexpr std::uint64_t kPartitionStream = 4;
  static constexpr std::uint64_t kGradCheckStream = 5;
  static constexpr std::uint64_t kPartyStreamBase = 0x1000;   // + party_id
  static constexpr std::uint64_t kUserStreamBase = 0x2000;    // + user_id (session draws)

  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_(stream_id) {
    std::uint64_t sm = seed ^ (stream_id * 0x9E3779B97F4A7C15ULL);
    for (auto& word : state_) word = splitmix_next(sm);
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform double in [0, 1), 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform double in (0, 1]; safe as a log() argument.
  double uniform_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; consumes exactly two raw draws and discards the sine variate,
  // so the draw count never depends on call history.
  double normal(double mean, double stddev) {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * radius * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Knuth multiplication method; exact for the modest means used here.
  int poisson(double mean) {
    if (mean <= 0.0) return 0;
    const double limit = std::exp(-mean);
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

  // Unbiased integer in [0, n) via bitmask rejection.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: n must be > 0");
    std::uint64_t mask = 1;
    while (mask < n) mask = (mask << 1) | 1;
    for (;;) {
      const std::uint64_t v = next_u64() & mask;
      if (v < n) return v;
    }
  }

  // Fisher-Yates, descending index order.
  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  static std::uint64_t splitmix_next(std::uint64_t& s) {
    s += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t state_[4];
};

}  // namespace fedmood
