#pragma once

#include <cstdint>
#include <span>
#include <utility>

namespace ncl {

// Counter-based generator built on the SplitMix64 mixer. A (seed, stream) key
// fixes the whole sequence, so independent streams (one per user, per epoch,
// ...) never depend on the order in which they are consumed.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);
  double normal();

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);
// Derives a stream id from several integers.
std::uint64_t stream_id(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0);

template <typename T>
void shuffle(std::span<T> values, CounterRng& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    using std::swap;
    swap(values[i - 1], values[j]);
  }
}

}  // namespace ncl
