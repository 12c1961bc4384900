#include "otnfm/data.hpp"

#include <cmath>
#include <numbers>

#include "otnfm/errors.hpp"

namespace otnfm {

DistributionSpec DistributionSpec::parse(const std::string& name) {
  DistributionSpec s;
  if (name == "gaussian" || name == "gauss") {
    s.kind = DistKind::Gaussian;
  } else if (name == "checkerboard") {
    s.kind = DistKind::Checkerboard;
  } else if (name == "spiral") {
    s.kind = DistKind::Spiral;
  } else if (name == "crescent") {
    s.kind = DistKind::Crescent;
  } else if (name == "8gmm") {
    s.kind = DistKind::EightGmm;
  } else if (name == "moons" || name == "2moons") {
    s.kind = DistKind::TwoMoons;
  } else {
    throw ConfigError("unknown distribution '" + name + "'");
  }
  return s;
}

std::string DistributionSpec::name() const {
  switch (kind) {
    case DistKind::Gaussian: return "gaussian";
    case DistKind::Checkerboard: return "checkerboard";
    case DistKind::Spiral: return "spiral";
    case DistKind::Crescent: return "crescent";
    case DistKind::EightGmm: return "8gmm";
    case DistKind::TwoMoons: return "moons";
  }
  return "?";
}

namespace {

constexpr double kPi = std::numbers::pi;

void sample_gaussian(double* p, Rng& rng) {
  p[0] = rng.normal();
  p[1] = rng.normal();
}

void sample_checkerboard(const DistributionSpec& s, double* p, Rng& rng) {
  // 8 active tiles out of the 4x4 grid: (row + col) even.
  const int pick = rng.uniform_int(8);
  int seen = 0;
  int row = 0, col = 0;
  for (int r = 0; r < 4 && seen <= pick; ++r)
    for (int c = 0; c < 4; ++c)
      if ((r + c) % 2 == 0 && seen++ == pick) {
        row = r;
        col = c;
      }
  const double tile = s.checker_extent / 2.0;
  p[0] = -s.checker_extent + tile * col + rng.uniform(0.0, tile);
  p[1] = -s.checker_extent + tile * row + rng.uniform(0.0, tile);
}

void sample_spiral(const DistributionSpec& s, double* p, Rng& rng) {
  const double theta = rng.uniform(s.spiral_theta_lo, s.spiral_theta_hi);
  const double r = s.spiral_a * theta;
  p[0] = r * std::cos(theta) + s.spiral_noise * rng.normal();
  p[1] = r * std::sin(theta) + s.spiral_noise * rng.normal();
}

void sample_crescent(const DistributionSpec& s, double* p, Rng& rng) {
  const double r = s.crescent_radius + s.crescent_radius_sd * rng.normal();
  const double theta = rng.uniform(kPi / 6.0, 5.0 * kPi / 6.0);
  // Mean height of the arc, so the shape straddles the origin.
  const double y_shift = s.crescent_radius * (3.0 / kPi);  // E[sin theta] = 3/pi
  p[0] = r * std::cos(theta);
  p[1] = r * std::sin(theta) - y_shift;
}

void sample_8gmm(const DistributionSpec& s, double* p, Rng& rng) {
  const int k = rng.uniform_int(8);
  const double a = 2.0 * kPi * k / 8.0;
  p[0] = s.gmm_radius * std::cos(a) + s.gmm_std * rng.normal();
  p[1] = s.gmm_radius * std::sin(a) + s.gmm_std * rng.normal();
}

void sample_moons(const DistributionSpec& s, double* p, Rng& rng) {
  const bool upper = rng.uniform() < 0.5;
  const double theta = rng.uniform(0.0, kPi);
  double x, y;
  if (upper) {
    x = std::cos(theta);
    y = std::sin(theta);
  } else {
    x = 1.0 - std::cos(theta);
    y = 0.5 - std::sin(theta);
  }
  x += s.moons_noise * rng.normal();
  y += s.moons_noise * rng.normal();
  // Center on the combined arc mean (0.5, 0.25), then spread.
  p[0] = s.moons_scale * (x - 0.5);
  p[1] = s.moons_scale * (y - 0.25);
}

}  // namespace

PointBatch sample(const DistributionSpec& spec, int n, Rng& rng) {
  if (n < 1) throw Error("sample: n must be >= 1");
  Tensor out = Tensor::zeros({n, 2});
  auto v = out.values_mut();
  for (int i = 0; i < n; ++i) {
    double* p = &v[static_cast<std::size_t>(i) * 2];
    switch (spec.kind) {
      case DistKind::Gaussian: sample_gaussian(p, rng); break;
      case DistKind::Checkerboard: sample_checkerboard(spec, p, rng); break;
      case DistKind::Spiral: sample_spiral(spec, p, rng); break;
      case DistKind::Crescent: sample_crescent(spec, p, rng); break;
      case DistKind::EightGmm: sample_8gmm(spec, p, rng); break;
      case DistKind::TwoMoons: sample_moons(spec, p, rng); break;
    }
  }
  return out;
}

Dataset make_dataset(const DistributionSpec& p0, const DistributionSpec& p1,
                     int n, std::uint64_t seed) {
  if (n < 1) throw Error("make_dataset: n must be >= 1");
  Rng rng0(seed, streams::kSourceData);
  Rng rng1(seed, streams::kTargetData);
  return {sample(p0, n, rng0), sample(p1, n, rng1), seed};
}

}  // namespace otnfm
