#include "otnfm/rng.hpp"

#include <cmath>
#include <numbers>

#include "otnfm/errors.hpp"

namespace otnfm {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer: a bijective 64-bit mix.
std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : key_(mix64(seed + kGolden) ^ mix64((stream + 1) * kGolden)) {}

std::uint64_t Rng::next_u64() { return mix64(key_ + (++counter_) * kGolden); }

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::uniform_int(int n) {
  if (n <= 0) throw Error("uniform_int: n must be positive");
  // Multiply-shift range reduction; bias is < 2^-32 for the n used here.
  return static_cast<int>((static_cast<unsigned __int128>(next_u64()) *
                           static_cast<unsigned __int128>(n)) >>
                          64);
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // u1 in (0, 1] so log stays finite.
  const double u1 =
      (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

void Rng::fill_normal(std::span<double> out) {
  for (double& x : out) x = normal();
}

void Rng::fill_uniform(std::span<double> out, double lo, double hi) {
  for (double& x : out) x = uniform(lo, hi);
}

void Rng::shuffle(std::vector<int>& items) {
  for (int i = static_cast<int>(items.size()) - 1; i > 0; --i) {
    const int j = uniform_int(i + 1);
    std::swap(items[i], items[j]);
  }
}

std::vector<int> Rng::indices_without_replacement(int n, int k) {
  if (k > n) throw Error("indices_without_replacement: k > n");
  // Partial Fisher-Yates on an index array.
  std::vector<int> pool(n);
  for (int i = 0; i < n; ++i) pool[i] = i;
  for (int i = 0; i < k; ++i) {
    const int j = i + uniform_int(n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace otnfm
