#pragma once

#include <cstdint>
#include <string>

#include "otnfm/rng.hpp"
#include "otnfm/schedule.hpp"
#include "otnfm/tensor.hpp"

namespace otnfm {

enum class DistKind { Gaussian, Checkerboard, Spiral, Crescent, EightGmm, TwoMoons };

// A 2-D sampling distribution. Every kind keeps its support inside
// |coordinate| <= 10 and sampling is a pure function of (spec, rng).
struct DistributionSpec {
  DistKind kind = DistKind::Gaussian;

  // Checkerboard: 4x4 grid of 2x2 tiles on [-extent, extent]^2, tiles with
  // even (row + col) parity active.
  double checker_extent = 4.0;
  // Spiral r = a * theta, theta ~ U(lo, hi), plus isotropic band noise.
  double spiral_a = 0.35;
  double spiral_theta_lo = 0.5;
  double spiral_theta_hi = 3.0 * 3.14159265358979323846;
  double spiral_noise = 0.15;
  // Crescent: radius ~ N(mu, sd), angle ~ U(pi/6, 5pi/6), opening downward,
  // shifted to straddle the origin.
  double crescent_radius = 2.5;
  double crescent_radius_sd = 0.25;
  // Eight-component ring mixture.
  double gmm_radius = 4.0;
  double gmm_std = 0.2;
  // Two moons: unit arcs, Gaussian jitter, centered and scaled by 2.
  double moons_noise = 0.1;
  double moons_scale = 2.0;

  // gaussian | checkerboard | spiral | crescent | 8gmm | moons
  static DistributionSpec parse(const std::string& name);
  std::string name() const;
};

PointBatch sample(const DistributionSpec& spec, int n, Rng& rng);

// Fixed training arrays; X0 and X1 come from independent sub-streams of the
// seed, so the dataset is regenerable from (specs, n, seed).
struct Dataset {
  PointBatch x0, x1;
  std::uint64_t seed = 0;
};

Dataset make_dataset(const DistributionSpec& p0, const DistributionSpec& p1,
                     int n, std::uint64_t seed);

}  // namespace otnfm
