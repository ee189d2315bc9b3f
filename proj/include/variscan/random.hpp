#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace variscan {

/// Philox4x32-10 counter-based generator.
///
/// The key is the 64-bit seed and the upper half of the 128-bit counter is
/// the stream id, so (seed, stream) pairs address disjoint sequences and the
/// full state is three integers plus a lane index.
class Philox4x32 {
 public:
  using result_type = std::uint64_t;

  Philox4x32() = default;
  Philox4x32(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (lane_ == 2) {
      refill();
    }
    return block_[lane_++];
  }

  // Raw block function, exposed for known-answer tests.
  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                            std::array<std::uint32_t, 2> key);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }
  int lane() const { return lane_; }

  // Restores an exact position: the next output is lane `lane` of block `counter - 1`.
  void restore(std::uint64_t counter, int lane);

  friend bool operator==(const Philox4x32& a, const Philox4x32& b) {
    return a.seed_ == b.seed_ && a.stream_ == b.stream_ && a.counter_ == b.counter_ &&
           a.lane_ == b.lane_;
  }

 private:
  void refill();

  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::uint64_t counter_ = 0;  // next block to generate
  int lane_ = 2;
  std::array<std::uint64_t, 2> block_{};
};

/// Seedable, splittable random source. A value type: copying it forks the
/// sequence, so callers that need independent streams should use split().
class RandomSource {
 public:
  RandomSource() = default;
  RandomSource(std::uint64_t seed, std::uint64_t stream_id) : engine_(seed, stream_id) {}

  std::uint64_t seed() const { return engine_.seed(); }
  std::uint64_t stream_id() const { return engine_.stream(); }

  // Independent stream derived from this source's seed.
  RandomSource split(std::uint64_t stream_id) const { return {engine_.seed(), stream_id}; }

  Philox4x32& engine() { return engine_; }
  const Philox4x32& engine() const { return engine_; }

  std::uint64_t bits() { return engine_(); }
  // Uniform on the open interval (0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  double exponential(double rate = 1.0);
  // Gamma with the given shape and rate.
  double gamma(double shape, double rate = 1.0);
  double beta(double a, double b);
  bool bernoulli(double prob) { return uniform() < prob; }

  friend bool operator==(const RandomSource& a, const RandomSource& b) {
    return a.engine_ == b.engine_;
  }

 private:
  Philox4x32 engine_;
};

}  // namespace variscan
