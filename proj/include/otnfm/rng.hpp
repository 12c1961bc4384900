#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace otnfm {

// Named sub-streams of a run seed. Each (seed, stream) pair yields an
// independent deterministic sequence, so e.g. data sampling never perturbs
// parameter initialization.
namespace streams {
inline constexpr std::uint64_t kSourceData = 1;
inline constexpr std::uint64_t kTargetData = 2;
inline constexpr std::uint64_t kParamInit = 3;
inline constexpr std::uint64_t kBatchIndices = 4;
inline constexpr std::uint64_t kTimeDraw = 5;
inline constexpr std::uint64_t kPathNoise = 6;
inline constexpr std::uint64_t kCoupling = 7;
inline constexpr std::uint64_t kEvalSource = 8;
inline constexpr std::uint64_t kEvalTarget = 9;
}  // namespace streams

// Counter-based generator: output i is a bijective mix of (key, i), where the
// key is derived from (seed, stream). Identical seed + identical call sequence
// gives an identical stream on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  int uniform_int(int n);                // [0, n)
  double normal();                       // standard normal via Box-Muller

  void fill_normal(std::span<double> out);
  void fill_uniform(std::span<double> out, double lo, double hi);

  // Fisher-Yates over index vectors.
  void shuffle(std::vector<int>& items);
  // k distinct indices drawn uniformly from [0, n).
  std::vector<int> indices_without_replacement(int n, int k);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace otnfm
