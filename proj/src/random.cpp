#include "variscan/random.hpp"

#include <boost/random/beta_distribution.hpp>
#include <boost/random/exponential_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "variscan/errors.hpp"

namespace variscan {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t prod = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(prod >> 32);
  lo = static_cast<std::uint32_t>(prod);
}

}  // namespace

std::array<std::uint32_t, 4> Philox4x32::block(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

void Philox4x32::refill() {
  const std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
      static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_),
                                            static_cast<std::uint32_t>(seed_ >> 32)};
  const auto out = block(ctr, key);
  block_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
  block_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
  ++counter_;
  lane_ = 0;
}

void Philox4x32::restore(std::uint64_t counter, int lane) {
  if (lane < 0 || lane > 2) throw InvalidStateError("Philox4x32: lane out of range");
  if (lane == 2 || counter == 0) {
    counter_ = counter;
    lane_ = 2;
    return;
  }
  counter_ = counter - 1;
  refill();
  lane_ = lane;
}

double RandomSource::uniform() {
  // 53 random bits, offset by half an ulp so 0 and 1 are excluded.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

std::size_t RandomSource::index(std::size_t n) {
  if (n == 0) throw DomainError("RandomSource::index: empty range");
  boost::random::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(engine_);
}

double RandomSource::normal() {
  boost::random::normal_distribution<double> dist;
  return dist(engine_);
}

double RandomSource::exponential(double rate) {
  boost::random::exponential_distribution<double> dist(rate);
  return dist(engine_);
}

double RandomSource::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) throw DomainError("RandomSource::gamma: bad parameters");
  boost::random::gamma_distribution<double> dist(shape, 1.0 / rate);
  return dist(engine_);
}

double RandomSource::beta(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw DomainError("RandomSource::beta: bad parameters");
  boost::random::beta_distribution<double> dist(a, b);
  return dist(engine_);
}

}  // namespace variscan
