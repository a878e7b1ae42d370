#pragma once

#include <cmath>
#include <cstdint>

namespace pfedpm {

// Counter-based PRNG: every draw is a pure hash of (key, counter), so a
// stream is fully determined by its derivation tuple and draw index.
// Streams are derived from (master seed, purpose id, client id, salt);
// adding clients or reordering work never shifts another stream.
class CounterRng {
 public:
  // Purpose ids, one per independent randomness consumer.
  enum Purpose : std::uint64_t {
    kBlobData = 1,
    kPartition = 2,
    kInitBody = 3,
    kInitDecision = 4,
    kInitRelation = 5,
    kShuffle = 6,
  };

  CounterRng(std::uint64_t master_seed, std::uint64_t purpose,
             std::uint64_t client_id = 0, std::uint64_t salt = 0)
      : key_(mix(mix(mix(mix(master_seed) ^ purpose) ^ client_id) ^ salt)) {}

  std::uint64_t next_u64() { return mix(key_ + 0x9e3779b97f4a7c15ull * ++counter_); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  // Box-Muller; consumes two uniforms per call.
  double gaussian() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  // splitmix64 finalizer
  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Fisher-Yates over [0, n) indices.
template <typename Vec>
void shuffle_indices(Vec& v, CounterRng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.below(i));
    auto tmp = v[i - 1];
    v[i - 1] = v[j];
    v[j] = tmp;
  }
}

}  // namespace pfedpm
