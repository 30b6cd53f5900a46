#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

// Deterministic random number plumbing. Everything downstream (data sampling,
// weight init, shuffles, subset draws) goes through these generators so that a
// run is reproducible from a single master seed on any platform.

namespace flab {

// SplitMix64 step applied to a value: add the golden-ratio increment, then
// apply the finalizer. Used both as a standalone mixer and to seed streams.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// FNV-1a over raw bytes, for folding string labels into seeds.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

// One element of a seed-derivation label list. Integers are mixed with
// SplitMix64, strings hashed with FNV-1a, so "fold 3" and the integer 3
// cannot collide by accident.
struct SeedLabel {
  std::uint64_t key;
  SeedLabel(int v) : key(mix64(static_cast<std::uint64_t>(static_cast<std::int64_t>(v)))) {}
  SeedLabel(long long v) : key(mix64(static_cast<std::uint64_t>(v))) {}
  SeedLabel(std::uint64_t v) : key(mix64(v)) {}
  SeedLabel(std::string_view s) : key(fnv1a64(s)) {}
  SeedLabel(const std::string& s) : key(fnv1a64(s)) {}
  SeedLabel(const char* s) : key(fnv1a64(s)) {}
};

// Derive a child seed from a master seed and a list of labels: start from
// mix64(master) and fold each label in with another SplitMix64 step. The
// result is order-sensitive and collision-resistant for practical purposes;
// an empty label list yields mix64(master).
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<SeedLabel> labels) {
  std::uint64_t h = mix64(master);
  for (const SeedLabel& l : labels) h = mix64(h ^ l.key);
  return h;
}

// xoshiro256** stream seeded via SplitMix64, with helpers for uniforms,
// unbiased bounded integers, and Box-Muller gaussians (the second output of
// each Box-Muller pair is cached and handed out on the next call).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& w : state_) {
      s += 0x9E3779B97F4A7C15ull;
      std::uint64_t z = s;
      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
      z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
      w = z ^ (z >> 31);
    }
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
  }

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

  // Uniform in [0, 1), 53-bit resolution.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; safe as a log() argument.
  double next_unit_open() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  // Unbiased uniform integer in [0, n); rejection on the biased tail.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t limit = n * (UINT64_MAX / n);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  // Standard gaussian via Box-Muller; generates a (cos, sin) pair and serves
  // the two values on consecutive calls.
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = next_unit_open();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t state_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// In-place Fisher-Yates shuffle driven by an Rng stream.
template <class T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace flab
