#pragma once

// Reproducible random substreams. Every stochastic quantity is drawn from a
// stream whose seed is a pure function of (master seed, index path), so
// results do not depend on scheduling or worker count.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>

namespace dirboot {

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Folds an index path into a master seed, e.g. derive_seed(seed, {rep, draw}).
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

/// Stream labels keep unrelated consumers of one master seed apart.
namespace stream_tag {
inline constexpr std::uint64_t kBootstrap = 0x62'6f'6f'74;   // "boot"
inline constexpr std::uint64_t kData = 0x64'61'74'61;        // "data"
inline constexpr std::uint64_t kLimitLaw = 0x6c'69'6d'74;    // "limt"
inline constexpr std::uint64_t kProbe = 0x70'72'6f'62;       // "prob"
inline constexpr std::uint64_t kCovariance = 0x63'6f'76'61;  // "cova"
}  // namespace stream_tag

/// mt19937_64 with portable transforms (the std distributions are
/// implementation-defined, which would break cross-platform replay).
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1].
  double uniform_open_left() { return 1.0 - uniform(); }
  double normal();
  double exponential() { return -std::log(uniform_open_left()); }
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Runs body(i) for i in [0, count) on `workers` threads. Iterations must
/// write only to their own slot; output order is by index, so results are
/// independent of worker count. workers == 0 means hardware concurrency.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& body);

}  // namespace dirboot
