#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rlep {

inline constexpr const char* kToolVersion = "0.1.0";

using TokenId = int;
using TokenSeq = std::vector<TokenId>;

// Deterministic engine used everywhere. mt19937_64's output stream is fully
// specified by the standard; distribution helpers below are hand-rolled so
// that results do not depend on the standard library implementation.
using Rng = std::mt19937_64;

// Error with a machine-parsable category. The CLI prints
// "error:<category>: <message>" and exits nonzero.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}
  const std::string& category() const { return category_; }

 private:
  std::string category_;
};

[[noreturn]] inline void fail(const char* category, const std::string& msg) {
  throw Error(category, msg);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Named substream derivation: all randomness in a run flows from one master
// seed, split by (tag, index). Streams are reconstructible from the tuple, so
// resuming at a rollout boundary replays the identical stream.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                 std::uint64_t index = 0) {
  return splitmix64(splitmix64(master ^ fnv1a64(tag)) + index);
}

inline Rng make_rng(std::uint64_t master, std::string_view tag,
                    std::uint64_t index = 0) {
  return Rng(derive_seed(master, tag, index));
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n). Rejection sampling keeps the draw unbiased and
// implementation-independent.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  if (n == 0) fail("invalid-params", "uniform_below: n must be positive");
  std::uint64_t threshold = (0ULL - n) % n;
  for (;;) {
    std::uint64_t r = rng();
    if (r >= threshold) return r % n;
  }
}

// Draws an index from an unnormalized weight vector by CDF inversion.
inline std::size_t categorical(Rng& rng, const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = uniform01(rng) * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  // Round-off can push u past the last partial sum; return the last nonzero.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return weights.size() - 1;
}

// Runs fn(i) for i in [0, n) across at most `workers` threads. Callers index
// into preallocated output slots, so results are identical for any worker
// count.
void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace rlep
