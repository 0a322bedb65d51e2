#pragma once

#include <cstdint>
#include <limits>

namespace ggom {

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based generator: the n-th output of a stream is a fixed function of
// (key, n), namely the SplitMix64 finalizer applied to key + n * golden. New
// independent streams are derived by hashing a stream id into the key, so the
// values a replication or subject sees do not depend on evaluation order.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed) : key_(mix64(seed ^ 0x6a09e667f3bcc909ULL)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix64(key_ + (++counter_) * kGolden); }

  CounterRng split(std::uint64_t stream) const {
    CounterRng child(0);
    child.key_ = mix64(key_ ^ mix64(stream + kGolden));
    return child;
  }

  // Uniform on the open interval (0, 1) with 53 random bits.
  double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  std::uint64_t counter() const { return counter_; }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace ggom
